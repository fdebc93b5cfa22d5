//! Deterministic stream derivation.
//!
//! Every random draw in a run comes from a ChaCha stream keyed by the master
//! seed plus a purpose tag and the relevant indices (replication, slot, user).
//! Replications therefore own independent streams: changing one replication's
//! seed cannot perturb any other.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags separating the derived streams of a run.
pub mod tag {
    pub const PLACEMENT: u64 = 0xA1;
    pub const PREFERENCES: u64 = 0xA2;
    pub const REQUESTS: u64 = 0xA3;
    pub const DECIDE: u64 = 0xA4;
    pub const MOBILITY: u64 = 0xA5;
    pub const ORACLE: u64 = 0xA6;
    pub const REPLICATION: u64 = 0xA7;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes an ordered sequence of parts into one 64-bit seed.
pub fn mix(parts: &[u64]) -> u64 {
    let mut acc = 0xA076_1D64_78BD_642Fu64;
    for &p in parts {
        acc = splitmix64(acc ^ splitmix64(p));
    }
    acc
}

/// A fresh generator for the stream identified by `parts`.
pub fn stream_rng(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(parts))
}

/// Derived seed for one replication of a run.
pub fn replication_seed(master: u64, replication: usize) -> u64 {
    mix(&[master, tag::REPLICATION, replication as u64])
}
