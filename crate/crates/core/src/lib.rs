//! Discrete-time simulator of cache-enabled small-cell networks with a
//! library of multi-agent bandit cache-placement learners, oracles, and
//! classical baselines.
//!
//! The crate is organized around one slot loop: a policy decides a placement,
//! the environment serves the slot's requests and reports delays and
//! delay-reduction rewards, rewards are assigned to coordination graph edges,
//! and the policy observes the outcome. The harness drives replications of
//! that loop and exports metrics as CSV.

pub mod baselines;
pub mod config;
pub mod demand;
pub mod env;
pub mod error;
pub mod export;
pub mod harness;
pub mod learners;
pub mod optimizers;
pub mod rng;
pub mod topology;

pub use error::{Error, Result};
