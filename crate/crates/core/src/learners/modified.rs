//! Adaptive learners for non-stationary workloads.
//!
//! No random initialization phase: every action of a newly active file starts
//! at an optimistic sentinel estimate, which guarantees it gets cached at
//! least once. Observed keys use the bound-in-the-log bonus with an adaptive
//! bound, the largest running average among active files, since no a priori
//! reward bound exists when delays and demand drift.

use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;

use crate::demand::ActiveFileSet;
use crate::env::{CacheMatrix, EdgeRewardTable, ServiceOutcome};
use crate::optimizers::{coordinate_ascent, top_s_selection_by, OptimisticValue, ScoreFunction};

use super::{CachePolicy, LogVariant, PolicyBuild, SlotContext, Stat};

/// Adaptive bonus: `sqrt(3 log(B^2 t) / (2 count))`, clamped to zero when the
/// bound (or the log argument) vanishes.
fn adaptive_bonus(log: LogVariant, bound: f64, t: u64, count: u64) -> f64 {
    if bound <= 0.0 || count == 0 {
        return 0.0;
    }
    let x = bound * bound * t.max(1) as f64;
    if x <= 1.0 {
        0.0
    } else {
        (3.0 * log.log(x) / (2.0 * count as f64)).sqrt()
    }
}

/// Per-(SBS, file) statistics with the active-file bookkeeping shared by both
/// adaptive learners.
#[derive(Debug, Clone)]
pub(super) struct AdaptiveCore {
    pub num_sbs: usize,
    pub num_files: usize,
    stats: Vec<Stat>,
    active: ActiveFileSet,
    log: LogVariant,
}

impl AdaptiveCore {
    fn new(num_sbs: usize, num_files: usize, log: LogVariant) -> Self {
        AdaptiveCore {
            num_sbs,
            num_files,
            stats: vec![Stat::default(); num_sbs * num_files],
            active: ActiveFileSet::default(),
            log,
        }
    }

    #[inline]
    fn stat(&self, m: usize, f: usize) -> Stat {
        self.stats[m * self.num_files + f]
    }

    pub fn is_active(&self, f: usize) -> bool {
        self.active.contains(f)
    }

    /// Largest running average over active files; zero before any reward.
    fn bound(&self, m: usize) -> f64 {
        self.active
            .iter()
            .map(|f| self.stat(m, f).avg)
            .fold(0.0, f64::max)
    }

    /// Estimate for caching `f` at `m`: sentinel while active but never
    /// cached, average plus adaptive bonus once observed, zero if inactive.
    fn value(&self, m: usize, f: usize, t: u64, bound: f64) -> OptimisticValue {
        if !self.active.contains(f) {
            return OptimisticValue::ZERO;
        }
        let stat = self.stat(m, f);
        if stat.count == 0 {
            OptimisticValue::H
        } else {
            OptimisticValue::finite(stat.avg + adaptive_bonus(self.log, bound, t, stat.count))
        }
    }

    fn row_values(&self, m: usize, t: u64) -> Vec<OptimisticValue> {
        let bound = self.bound(m);
        (0..self.num_files)
            .map(|f| self.value(m, f, t, bound))
            .collect()
    }

    fn placement(&self, t: u64, cache_size: usize) -> CacheMatrix {
        let mut cache = CacheMatrix::empty(self.num_sbs, self.num_files, cache_size);
        for m in 0..self.num_sbs {
            let values = self.row_values(m, t);
            cache.set_row(m, &top_s_selection_by(&values, cache_size));
        }
        cache
    }

    fn update(&mut self, cache: &CacheMatrix, outcome: &ServiceOutcome) {
        for m in 0..self.num_sbs {
            for f in cache.row_files(m) {
                let reward = outcome.sbs_file_reward.get(&(m, f)).copied().unwrap_or(0.0);
                self.stats[m * self.num_files + f].push(reward);
            }
        }
    }

    fn activate(&mut self, new_files: &[usize]) {
        for &f in new_files {
            self.active.insert(f);
        }
    }
}

/// Adaptive independent learner.
pub struct ModifiedDistributedLearner {
    core: AdaptiveCore,
    cache_size: usize,
    t: u64,
}

impl ModifiedDistributedLearner {
    pub fn new(build: &PolicyBuild<'_>) -> Self {
        ModifiedDistributedLearner {
            core: AdaptiveCore::new(build.index.num_sbs(), build.num_files, build.log),
            cache_size: build.cache_size,
            t: 0,
        }
    }

    /// Current estimate for caching `f` at `m`, exposed for inspection.
    pub fn estimate(&self, m: usize, f: usize) -> OptimisticValue {
        self.core.value(m, f, self.t.max(1), self.core.bound(m))
    }
}

impl CachePolicy for ModifiedDistributedLearner {
    fn name(&self) -> &'static str {
        "modified_distributed"
    }

    fn decide(&mut self, _ctx: &SlotContext<'_>, _rng: &mut ChaCha8Rng) -> CacheMatrix {
        self.t += 1;
        self.core.placement(self.t, self.cache_size)
    }

    fn observe(
        &mut self,
        _ctx: &SlotContext<'_>,
        cache: &CacheMatrix,
        outcome: &ServiceOutcome,
        _edge_rewards: &EdgeRewardTable,
        new_files: &[usize],
    ) {
        self.core.update(cache, outcome);
        self.core.activate(new_files);
    }
}

/// Adaptive edge-based collaborative learner.
///
/// Edge statistics are created lazily per directed pair, which also covers
/// per-slot mobility where the coordination graph drifts over time.
pub struct ModifiedEdgeLearner {
    seed_core: AdaptiveCore,
    num_sbs: usize,
    num_files: usize,
    cache_size: usize,
    self_stats: Vec<Stat>,
    cross_stats: HashMap<(usize, usize), Vec<Stat>>,
    log: LogVariant,
    max_rounds: usize,
    t: u64,
}

impl ModifiedEdgeLearner {
    pub fn new(build: &PolicyBuild<'_>) -> Self {
        let num_sbs = build.index.num_sbs();
        ModifiedEdgeLearner {
            seed_core: AdaptiveCore::new(num_sbs, build.num_files, build.log),
            num_sbs,
            num_files: build.num_files,
            cache_size: build.cache_size,
            self_stats: vec![Stat::default(); num_sbs * build.num_files],
            cross_stats: HashMap::new(),
            log: build.log,
            max_rounds: build.ca_max_rounds,
            t: 0,
        }
    }

    fn cross_stat(&self, m: usize, n: usize, f: usize) -> Stat {
        self.cross_stats
            .get(&(m, n))
            .map_or(Stat::default(), |v| v[f])
    }

    fn self_bound(&self, m: usize) -> f64 {
        self.seed_core
            .active
            .iter()
            .map(|f| self.self_stats[m * self.num_files + f].avg)
            .fold(0.0, f64::max)
    }

    fn cross_bound(&self, m: usize, n: usize) -> f64 {
        let Some(stats) = self.cross_stats.get(&(m, n)) else {
            return 0.0;
        };
        self.seed_core
            .active
            .iter()
            .map(|f| stats[f].avg)
            .fold(0.0, f64::max)
    }

    fn value_from(&self, stat: Stat, active: bool, bound: f64) -> OptimisticValue {
        if !active {
            OptimisticValue::ZERO
        } else if stat.count == 0 {
            OptimisticValue::H
        } else {
            OptimisticValue::finite(stat.avg + adaptive_bonus(self.log, bound, self.t, stat.count))
        }
    }
}

struct ModifiedEdgeObjective<'a> {
    l: &'a ModifiedEdgeLearner,
    gamma: &'a [Vec<usize>],
    /// `[m]` self bound, `[m][n]` cross bounds cached for the slot.
    self_bounds: Vec<f64>,
    cross_bounds: HashMap<(usize, usize), f64>,
}

impl ModifiedEdgeObjective<'_> {
    fn self_value(&self, m: usize, f: usize) -> OptimisticValue {
        let stat = self.l.self_stats[m * self.l.num_files + f];
        self.l
            .value_from(stat, self.l.seed_core.is_active(f), self.self_bounds[m])
    }

    fn cross_value(&self, m: usize, n: usize, f: usize) -> OptimisticValue {
        let stat = self.l.cross_stat(m, n, f);
        let bound = self.cross_bounds.get(&(m, n)).copied().unwrap_or(0.0);
        self.l.value_from(stat, self.l.seed_core.is_active(f), bound)
    }
}

impl ScoreFunction for ModifiedEdgeObjective<'_> {
    type Value = OptimisticValue;

    fn evaluate(&self, cache: &CacheMatrix) -> OptimisticValue {
        let mut total = OptimisticValue::ZERO;
        for m in 0..self.l.num_sbs {
            for f in cache.row_files(m) {
                total = total + self.self_value(m, f);
                for &n in &self.gamma[m] {
                    if !cache.get(n, f) {
                        total = total + self.cross_value(m, n, f);
                    }
                }
            }
        }
        total
    }

    fn flip_gain(&self, cache: &CacheMatrix, m: usize, f: usize) -> OptimisticValue {
        let mut gain = self.self_value(m, f);
        for &n in &self.gamma[m] {
            if cache.get(n, f) {
                gain = gain - self.cross_value(n, m, f);
            } else {
                gain = gain + self.cross_value(m, n, f);
            }
        }
        gain
    }
}

impl CachePolicy for ModifiedEdgeLearner {
    fn name(&self) -> &'static str {
        "modified_edge"
    }

    fn decide(&mut self, ctx: &SlotContext<'_>, _rng: &mut ChaCha8Rng) -> CacheMatrix {
        self.t += 1;
        let seed = self.seed_core.placement(self.t, self.cache_size);
        let gamma = &ctx.graph.gamma;
        let self_bounds = (0..self.num_sbs).map(|m| self.self_bound(m)).collect();
        let mut cross_bounds = HashMap::new();
        for (m, g) in gamma.iter().enumerate() {
            for &n in g {
                cross_bounds.insert((m, n), self.cross_bound(m, n));
            }
        }
        let objective = ModifiedEdgeObjective {
            l: self,
            gamma,
            self_bounds,
            cross_bounds,
        };
        coordinate_ascent(&objective, seed, self.max_rounds)
            .expect("seed placement is budget feasible")
    }

    fn observe(
        &mut self,
        ctx: &SlotContext<'_>,
        cache: &CacheMatrix,
        outcome: &ServiceOutcome,
        edge_rewards: &EdgeRewardTable,
        new_files: &[usize],
    ) {
        self.seed_core.update(cache, outcome);
        let num_files = self.num_files;
        for m in 0..self.num_sbs {
            for f in cache.row_files(m) {
                let r = edge_rewards.get(&(m, m, f)).copied().unwrap_or(0.0);
                self.self_stats[m * num_files + f].push(r);
                for &n in &ctx.graph.gamma[m] {
                    if !cache.get(n, f) {
                        let r = edge_rewards.get(&(m, n, f)).copied().unwrap_or(0.0);
                        self.cross_stats
                            .entry((m, n))
                            .or_insert_with(|| vec![Stat::default(); num_files])[f]
                            .push(r);
                    }
                }
            }
        }
        self.seed_core.activate(new_files);
    }
}
