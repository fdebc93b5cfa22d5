//! Cache-placement policies behind one decide/observe contract.
//!
//! The bandit learners differ in how they decompose the slot reward into
//! keyed statistics: per (SBS, file) action, per joint action with the
//! coordination graph neighborhood, per (SBS, closer-set) class of users, or
//! per coordination graph edge. Each keeps running counts and averages per
//! key, scores actions optimistically, and maximizes the resulting estimated
//! reward under the cache budget.

mod agent;
mod bounds;
mod distributed;
mod edge;
mod modified;
mod oracle;

pub use agent::{AgentSbsLearner, AgentUserLearner};
pub use bounds::{BoundTable, VsetIndex};
pub use distributed::DistributedLearner;
pub use edge::EdgeLearner;
pub use modified::{ModifiedDistributedLearner, ModifiedEdgeLearner};
pub use oracle::{oracle_coordinate_ascent, FixedPlacementPolicy};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::demand::PreferenceMatrix;
use crate::env::{CacheMatrix, EdgeRewardTable, ServiceOutcome};
use crate::error::{Error, Result};
use crate::optimizers::greedy_placement;
use crate::topology::{CoordinationGraph, DelayModel, NeighborIndex};

/// Which log the perturbed terms use. The exploration theory wants the
/// natural log; base 2 is kept as a switch for comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogVariant {
    #[default]
    Natural,
    Base2,
}

impl LogVariant {
    #[inline]
    fn log(self, x: f64) -> f64 {
        match self {
            LogVariant::Natural => x.ln(),
            LogVariant::Base2 => x.log2(),
        }
    }
}

/// Exploration flavor of a learner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PerturbVariant {
    /// Bound-scaled bonus: `B * sqrt(3 log t / (2 T))`.
    UcbV1,
    /// Bound folded into the log: `sqrt(3 log(B^2 t) / (2 T))`, zero when
    /// `B = 0` or `B^2 t < 1`.
    UcbV2,
    /// No bonus; explore by caching uniformly at random with this rate.
    EpsilonGreedy(f64),
}

/// Exploration configuration shared by the stationary learners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbSpec {
    pub variant: PerturbVariant,
    pub log: LogVariant,
}

/// Optimism bonus added to a key's running average.
///
/// `t` is the learner's post-initialization slot counter and `count` the
/// number of times the key's joint action has been realized. A key that was
/// never realized has no defined bonus; stationary learners guarantee
/// `count >= 1` through their initialization phase.
pub fn perturbed_term(
    variant: PerturbVariant,
    log: LogVariant,
    bound: f64,
    t: u64,
    count: u64,
) -> Result<f64> {
    if count == 0 {
        return Err(Error::UnseenKey);
    }
    let t = t.max(1) as f64;
    let count = count as f64;
    Ok(match variant {
        PerturbVariant::UcbV1 => bound * (3.0 * log.log(t) / (2.0 * count)).sqrt(),
        PerturbVariant::UcbV2 => {
            if bound <= 0.0 {
                0.0
            } else {
                let x = bound * bound * t;
                if x <= 1.0 {
                    0.0
                } else {
                    (3.0 * log.log(x) / (2.0 * count)).sqrt()
                }
            }
        }
        PerturbVariant::EpsilonGreedy(_) => 0.0,
    })
}

/// Running count and mean of the rewards assigned to one key.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Stat {
    pub count: u64,
    pub avg: f64,
}

impl Stat {
    #[inline]
    pub fn push(&mut self, reward: f64) {
        self.count += 1;
        self.avg += (reward - self.avg) / self.count as f64;
    }
}

#[inline]
fn debug_check_bound(reward: f64, bound: f64) {
    debug_assert!(
        reward <= bound * (1.0 + 1e-9) + 1e-12,
        "observed reward {reward} exceeds its upper bound {bound}"
    );
}

/// Per-slot structures handed to a policy. Under per-slot mobility these are
/// rebuilt every slot; otherwise they are the same objects for the whole run.
pub struct SlotContext<'a> {
    /// 1-based slot number within the run.
    pub t: usize,
    pub index: &'a NeighborIndex,
    pub delays: &'a DelayModel,
    pub graph: &'a CoordinationGraph,
}

/// Uniform decide/observe contract for learners, baselines, and oracles.
///
/// `decide` must return a budget-feasible matrix; `observe` is called exactly
/// once per slot, after the decided placement served the slot's requests.
pub trait CachePolicy {
    fn name(&self) -> &'static str;

    fn decide(&mut self, ctx: &SlotContext<'_>, rng: &mut ChaCha8Rng) -> CacheMatrix;

    fn observe(
        &mut self,
        ctx: &SlotContext<'_>,
        cache: &CacheMatrix,
        outcome: &ServiceOutcome,
        edge_rewards: &EdgeRewardTable,
        new_files: &[usize],
    );

    /// True while the policy is still covering its joint actions; such slots
    /// are excluded from regret accounting.
    fn in_initial_phase(&self) -> bool {
        false
    }
}

/// One joint-action coverage requirement: the placement bits a key needs on
/// its SBSs for a single file.
#[derive(Debug, Clone)]
pub struct InitPattern {
    pub file: usize,
    /// `(sbs, bit)` constraints, distinct SBSs.
    pub bits: Vec<(usize, bool)>,
}

/// Deterministic round-robin scheduler for the initialization phase: each
/// slot packs as many still-uncovered patterns as fit together under the
/// per-SBS budget, in listing order.
#[derive(Debug, Clone)]
pub struct InitSchedule {
    patterns: Vec<InitPattern>,
    covered: Vec<bool>,
    remaining: usize,
}

impl InitSchedule {
    pub fn new(patterns: Vec<InitPattern>) -> Self {
        let remaining = patterns.len();
        let covered = vec![false; patterns.len()];
        InitSchedule {
            patterns,
            covered,
            remaining,
        }
    }

    pub fn is_done(&self) -> bool {
        self.remaining == 0
    }

    /// Placement for the next initialization slot.
    pub fn plan_slot(&self, num_sbs: usize, num_files: usize, cache_size: usize) -> CacheMatrix {
        assert!(cache_size >= 1);
        let mut assigned: HashMap<(usize, usize), bool> = HashMap::new();
        let mut ones = vec![0usize; num_sbs];
        for (i, pattern) in self.patterns.iter().enumerate() {
            if self.covered[i] {
                continue;
            }
            let mut new_ones: Vec<usize> = Vec::new();
            let mut compatible = true;
            for &(sbs, bit) in &pattern.bits {
                match assigned.get(&(sbs, pattern.file)) {
                    Some(&prev) if prev != bit => {
                        compatible = false;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        if bit {
                            if ones[sbs] + 1 > cache_size {
                                compatible = false;
                                break;
                            }
                            new_ones.push(sbs);
                        }
                    }
                }
            }
            if !compatible {
                continue;
            }
            for &(sbs, bit) in &pattern.bits {
                assigned.insert((sbs, pattern.file), bit);
            }
            for sbs in new_ones {
                ones[sbs] += 1;
            }
        }
        let mut cache = CacheMatrix::empty(num_sbs, num_files, cache_size);
        for ((sbs, file), bit) in assigned {
            if bit {
                cache.set(sbs, file, true);
            }
        }
        cache
    }

    /// Marks every pattern realized by `cache` as covered.
    pub fn mark_covered(&mut self, cache: &CacheMatrix) {
        for (i, pattern) in self.patterns.iter().enumerate() {
            if self.covered[i] {
                continue;
            }
            if pattern
                .bits
                .iter()
                .all(|&(sbs, bit)| cache.get(sbs, pattern.file) == bit)
            {
                self.covered[i] = true;
                self.remaining -= 1;
            }
        }
    }
}

/// Selectable policy families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Distributed,
    DistributedV2,
    DistributedEps,
    AgentSbs,
    AgentSbsV2,
    AgentSbsEps,
    AgentUser,
    AgentUserV2,
    AgentUserEps,
    Edge,
    EdgeV2,
    EdgeEps,
    ModifiedDistributed,
    ModifiedEdge,
    Lfu,
    Lru,
    Cucb,
    OracleCa,
    OracleGreedy,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 19] = [
        LearnerKind::Distributed,
        LearnerKind::DistributedV2,
        LearnerKind::DistributedEps,
        LearnerKind::AgentSbs,
        LearnerKind::AgentSbsV2,
        LearnerKind::AgentSbsEps,
        LearnerKind::AgentUser,
        LearnerKind::AgentUserV2,
        LearnerKind::AgentUserEps,
        LearnerKind::Edge,
        LearnerKind::EdgeV2,
        LearnerKind::EdgeEps,
        LearnerKind::ModifiedDistributed,
        LearnerKind::ModifiedEdge,
        LearnerKind::Lfu,
        LearnerKind::Lru,
        LearnerKind::Cucb,
        LearnerKind::OracleCa,
        LearnerKind::OracleGreedy,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            LearnerKind::Distributed => "distributed",
            LearnerKind::DistributedV2 => "distributed_v2",
            LearnerKind::DistributedEps => "distributed_eps",
            LearnerKind::AgentSbs => "agent_sbs",
            LearnerKind::AgentSbsV2 => "agent_sbs_v2",
            LearnerKind::AgentSbsEps => "agent_sbs_eps",
            LearnerKind::AgentUser => "agent_user",
            LearnerKind::AgentUserV2 => "agent_user_v2",
            LearnerKind::AgentUserEps => "agent_user_eps",
            LearnerKind::Edge => "edge",
            LearnerKind::EdgeV2 => "edge_v2",
            LearnerKind::EdgeEps => "edge_eps",
            LearnerKind::ModifiedDistributed => "modified_distributed",
            LearnerKind::ModifiedEdge => "modified_edge",
            LearnerKind::Lfu => "lfu",
            LearnerKind::Lru => "lru",
            LearnerKind::Cucb => "cucb",
            LearnerKind::OracleCa => "oracle_ca",
            LearnerKind::OracleGreedy => "oracle_greedy",
        }
    }

    /// Stationary UCB learners rely on bounds precomputed from static delays.
    pub fn needs_static_delays(&self) -> bool {
        matches!(
            self,
            LearnerKind::Distributed
                | LearnerKind::DistributedV2
                | LearnerKind::AgentSbs
                | LearnerKind::AgentSbsV2
                | LearnerKind::AgentSbsEps
                | LearnerKind::AgentUser
                | LearnerKind::AgentUserV2
                | LearnerKind::AgentUserEps
                | LearnerKind::Edge
                | LearnerKind::EdgeV2
                | LearnerKind::EdgeEps
                | LearnerKind::DistributedEps
                | LearnerKind::OracleCa
                | LearnerKind::OracleGreedy
        )
    }

    /// Oracles need the true preference matrix, so they only exist in
    /// stationary mode.
    pub fn needs_preferences(&self) -> bool {
        matches!(self, LearnerKind::OracleCa | LearnerKind::OracleGreedy)
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LearnerKind::ALL
            .iter()
            .find(|k| k.as_str() == s)
            .copied()
            .ok_or_else(|| {
                Error::config(
                    "learner",
                    format!(
                        "unknown learner `{s}`; expected one of: {}",
                        LearnerKind::ALL.map(|k| k.as_str()).join(", ")
                    ),
                )
            })
    }
}

/// Everything needed to instantiate a policy for one replication.
pub struct PolicyBuild<'a> {
    pub index: &'a NeighborIndex,
    pub delays: &'a DelayModel,
    pub graph: &'a CoordinationGraph,
    pub num_files: usize,
    pub cache_size: usize,
    pub epsilon: f64,
    pub log: LogVariant,
    pub ca_max_rounds: usize,
    pub oracle_restarts: usize,
    /// True preferences, available in stationary mode only.
    pub prefs: Option<&'a PreferenceMatrix>,
}

fn spec_for(kind: LearnerKind, epsilon: f64, log: LogVariant) -> PerturbSpec {
    let variant = match kind {
        LearnerKind::Distributed
        | LearnerKind::AgentSbs
        | LearnerKind::AgentUser
        | LearnerKind::Edge => PerturbVariant::UcbV1,
        LearnerKind::DistributedV2
        | LearnerKind::AgentSbsV2
        | LearnerKind::AgentUserV2
        | LearnerKind::EdgeV2 => PerturbVariant::UcbV2,
        _ => PerturbVariant::EpsilonGreedy(epsilon),
    };
    PerturbSpec { variant, log }
}

/// Builds a policy. `oracle_rng` drives the oracle's random restarts and is
/// only touched by the oracle kinds.
pub fn build_policy(
    kind: LearnerKind,
    build: &PolicyBuild<'_>,
    oracle_rng: &mut ChaCha8Rng,
) -> Result<Box<dyn CachePolicy>> {
    let spec = spec_for(kind, build.epsilon, build.log);
    Ok(match kind {
        LearnerKind::Distributed | LearnerKind::DistributedV2 | LearnerKind::DistributedEps => {
            Box::new(DistributedLearner::new(kind, build, spec))
        }
        LearnerKind::AgentSbs | LearnerKind::AgentSbsV2 | LearnerKind::AgentSbsEps => {
            Box::new(AgentSbsLearner::new(kind, build, spec)?)
        }
        LearnerKind::AgentUser | LearnerKind::AgentUserV2 | LearnerKind::AgentUserEps => {
            Box::new(AgentUserLearner::new(kind, build, spec))
        }
        LearnerKind::Edge | LearnerKind::EdgeV2 | LearnerKind::EdgeEps => {
            Box::new(EdgeLearner::new(kind, build, spec))
        }
        LearnerKind::ModifiedDistributed => Box::new(ModifiedDistributedLearner::new(build)),
        LearnerKind::ModifiedEdge => Box::new(ModifiedEdgeLearner::new(build)),
        LearnerKind::Lfu => Box::new(crate::baselines::LfuPolicy::new(
            build.index.num_sbs(),
            build.num_files,
            build.cache_size,
        )),
        LearnerKind::Lru => Box::new(crate::baselines::LruPolicy::new(
            build.index.num_sbs(),
            build.num_files,
            build.cache_size,
        )),
        LearnerKind::Cucb => Box::new(crate::baselines::CucbPolicy::new(build)),
        LearnerKind::OracleCa => {
            let prefs = build.prefs.ok_or_else(|| {
                Error::config("learner", "oracle_ca requires a stationary workload")
            })?;
            let score = crate::env::ExpectedRewardScore {
                prefs,
                index: build.index,
                delays: build.delays,
            };
            let matrix = oracle_coordinate_ascent(
                &score,
                build.index.num_sbs(),
                build.num_files,
                build.cache_size,
                build.oracle_restarts,
                build.ca_max_rounds,
                oracle_rng,
            )?;
            Box::new(FixedPlacementPolicy::new("oracle_ca", matrix))
        }
        LearnerKind::OracleGreedy => {
            let prefs = build.prefs.ok_or_else(|| {
                Error::config("learner", "oracle_greedy requires a stationary workload")
            })?;
            let score = crate::env::ExpectedRewardScore {
                prefs,
                index: build.index,
                delays: build.delays,
            };
            let matrix = greedy_placement(
                &score,
                build.index.num_sbs(),
                build.num_files,
                build.cache_size,
            );
            Box::new(FixedPlacementPolicy::new("oracle_greedy", matrix))
        }
    })
}
