//! Reference policies: reactive LFU/LRU replacement per SBS and a
//! predict-then-optimize baseline that tracks local popularity with a UCB
//! index.

use std::collections::{BTreeMap, BTreeSet};

use rand_chacha::ChaCha8Rng;

use crate::env::{CacheMatrix, EdgeRewardTable, ServiceOutcome};
use crate::learners::{CachePolicy, PolicyBuild, SlotContext};
use crate::optimizers::{coordinate_ascent, OptimisticValue, ScoreFunction};

/// Least-frequently-used replacement, one independent cache per SBS.
///
/// Every neighbor-user request bumps the file's lifetime counter; a request
/// for an uncached file evicts the cached file with the smallest counter
/// (ties toward the lower file id).
pub struct LfuPolicy {
    num_sbs: usize,
    num_files: usize,
    cache_size: usize,
    cached: Vec<BTreeSet<usize>>,
    counts: Vec<Vec<u64>>,
}

impl LfuPolicy {
    pub fn new(num_sbs: usize, num_files: usize, cache_size: usize) -> Self {
        LfuPolicy {
            num_sbs,
            num_files,
            cache_size,
            cached: vec![BTreeSet::new(); num_sbs],
            counts: vec![vec![0; num_files]; num_sbs],
        }
    }

    fn snapshot(&self) -> CacheMatrix {
        let mut cache = CacheMatrix::empty(self.num_sbs, self.num_files, self.cache_size);
        for (m, set) in self.cached.iter().enumerate() {
            for &f in set {
                cache.set(m, f, true);
            }
        }
        cache
    }

    /// Applies one neighbor request to SBS `m`'s cache.
    fn on_request(&mut self, m: usize, file: usize) {
        self.counts[m][file] += 1;
        if self.cached[m].contains(&file) {
            return;
        }
        if self.cached[m].len() >= self.cache_size.min(self.num_files) {
            let victim = self.cached[m]
                .iter()
                .copied()
                .min_by_key(|&f| (self.counts[m][f], f))
                .expect("cache is non-empty when full");
            self.cached[m].remove(&victim);
        }
        self.cached[m].insert(file);
    }
}

impl CachePolicy for LfuPolicy {
    fn name(&self) -> &'static str {
        "lfu"
    }

    fn decide(&mut self, _ctx: &SlotContext<'_>, _rng: &mut ChaCha8Rng) -> CacheMatrix {
        self.snapshot()
    }

    fn observe(
        &mut self,
        ctx: &SlotContext<'_>,
        _cache: &CacheMatrix,
        outcome: &ServiceOutcome,
        _edge_rewards: &EdgeRewardTable,
        _new_files: &[usize],
    ) {
        for req in &outcome.per_request {
            for &m in &ctx.index.neighbors_of_user[req.user] {
                self.on_request(m, req.file);
            }
        }
    }
}

/// Least-recently-used replacement, one independent cache per SBS.
///
/// Hits refresh recency; a miss with a full cache evicts the stalest file
/// (ties toward the lower file id). Recency is a per-SBS sequence over
/// processed requests, so intra-slot order follows user id.
pub struct LruPolicy {
    num_sbs: usize,
    num_files: usize,
    cache_size: usize,
    /// Per SBS: cached file -> last-touch stamp.
    cached: Vec<BTreeMap<usize, u64>>,
    seq: Vec<u64>,
}

impl LruPolicy {
    pub fn new(num_sbs: usize, num_files: usize, cache_size: usize) -> Self {
        LruPolicy {
            num_sbs,
            num_files,
            cache_size,
            cached: vec![BTreeMap::new(); num_sbs],
            seq: vec![0; num_sbs],
        }
    }

    fn snapshot(&self) -> CacheMatrix {
        let mut cache = CacheMatrix::empty(self.num_sbs, self.num_files, self.cache_size);
        for (m, map) in self.cached.iter().enumerate() {
            for &f in map.keys() {
                cache.set(m, f, true);
            }
        }
        cache
    }

    fn on_request(&mut self, m: usize, file: usize) {
        let stamp = self.seq[m];
        self.seq[m] += 1;
        if let Some(entry) = self.cached[m].get_mut(&file) {
            *entry = stamp;
            return;
        }
        if self.cached[m].len() >= self.cache_size.min(self.num_files) {
            let victim = self.cached[m]
                .iter()
                .map(|(&f, &s)| (s, f))
                .min()
                .expect("cache is non-empty when full")
                .1;
            self.cached[m].remove(&victim);
        }
        self.cached[m].insert(file, stamp);
    }
}

impl CachePolicy for LruPolicy {
    fn name(&self) -> &'static str {
        "lru"
    }

    fn decide(&mut self, _ctx: &SlotContext<'_>, _rng: &mut ChaCha8Rng) -> CacheMatrix {
        self.snapshot()
    }

    fn observe(
        &mut self,
        ctx: &SlotContext<'_>,
        _cache: &CacheMatrix,
        outcome: &ServiceOutcome,
        _edge_rewards: &EdgeRewardTable,
        _new_files: &[usize],
    ) {
        for req in &outcome.per_request {
            for &m in &ctx.index.neighbors_of_user[req.user] {
                self.on_request(m, req.file);
            }
        }
    }
}

/// Predict-then-optimize baseline: each SBS tracks how often its neighbor
/// users request each file (regardless of cache contents), forms a UCB index
/// on the per-slot request rate, and placements maximize the index-weighted
/// delay reduction with the SBS's whole neighborhood collapsed into one
/// aggregate user at the average link delay.
///
/// Collapsing the neighborhood is what makes this a baseline: requests from
/// users shared with another SBS and requests from exclusive users are
/// indistinguishable, so no meaningful coordination can emerge.
pub struct CucbPolicy {
    num_sbs: usize,
    num_files: usize,
    cache_size: usize,
    /// `m * F + f` -> cumulative neighbor request count.
    requests: Vec<u64>,
    slots_observed: u64,
    /// Per SBS: delay reduction of the aggregate user (zero when no users).
    reward_scale: Vec<f64>,
    max_rounds: usize,
}

impl CucbPolicy {
    pub fn new(build: &PolicyBuild<'_>) -> Self {
        let num_sbs = build.index.num_sbs();
        let reward_scale = (0..num_sbs)
            .map(|m| {
                let users = &build.index.neighbors_of_sbs[m];
                if users.is_empty() {
                    return 0.0;
                }
                let mean_delay: f64 = users
                    .iter()
                    .map(|&u| build.delays.neighbor_delay(m, u))
                    .sum::<f64>()
                    / users.len() as f64;
                build.delays.core_delay - mean_delay
            })
            .collect();
        CucbPolicy {
            num_sbs,
            num_files: build.num_files,
            cache_size: build.cache_size,
            requests: vec![0; num_sbs * build.num_files],
            slots_observed: 0,
            reward_scale,
            max_rounds: build.ca_max_rounds,
        }
    }

    /// Total neighbor requests recorded for (m, f).
    pub fn request_count(&self, m: usize, f: usize) -> u64 {
        self.requests[m * self.num_files + f]
    }

    /// UCB index on the per-slot request rate; optimistic sentinel before the
    /// first observed slot.
    fn index(&self, m: usize, f: usize) -> OptimisticValue {
        if self.slots_observed == 0 {
            return OptimisticValue::H;
        }
        let t = self.slots_observed as f64;
        let p_hat = self.request_count(m, f) as f64 / t;
        OptimisticValue::finite(p_hat + (3.0 * t.ln() / (2.0 * t)).sqrt())
    }
}

struct CucbObjective<'a> {
    p: &'a CucbPolicy,
}

impl CucbObjective<'_> {
    fn value(&self, m: usize, f: usize) -> OptimisticValue {
        let idx = self.p.index(m, f);
        if idx.sentinels > 0 {
            idx
        } else {
            OptimisticValue::finite(idx.finite * self.p.reward_scale[m])
        }
    }
}

impl ScoreFunction for CucbObjective<'_> {
    type Value = OptimisticValue;

    fn evaluate(&self, cache: &CacheMatrix) -> OptimisticValue {
        let mut total = OptimisticValue::ZERO;
        for m in 0..self.p.num_sbs {
            for f in cache.row_files(m) {
                total = total + self.value(m, f);
            }
        }
        total
    }

    fn flip_gain(&self, _cache: &CacheMatrix, m: usize, f: usize) -> OptimisticValue {
        self.value(m, f)
    }
}

impl CachePolicy for CucbPolicy {
    fn name(&self) -> &'static str {
        "cucb"
    }

    fn decide(&mut self, _ctx: &SlotContext<'_>, _rng: &mut ChaCha8Rng) -> CacheMatrix {
        let objective = CucbObjective { p: self };
        let initial = CacheMatrix::empty(self.num_sbs, self.num_files, self.cache_size);
        coordinate_ascent(&objective, initial, self.max_rounds)
            .expect("empty placement is budget feasible")
    }

    fn observe(
        &mut self,
        ctx: &SlotContext<'_>,
        _cache: &CacheMatrix,
        outcome: &ServiceOutcome,
        _edge_rewards: &EdgeRewardTable,
        _new_files: &[usize],
    ) {
        self.slots_observed += 1;
        for req in &outcome.per_request {
            for &m in &ctx.index.neighbors_of_user[req.user] {
                self.requests[m * self.num_files + req.file] += 1;
            }
        }
    }
}
