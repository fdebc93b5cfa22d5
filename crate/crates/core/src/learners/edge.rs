//! Edge-based collaborative learner: rewards live on coordination graph
//! edges, so the key space grows with the edge count instead of
//! exponentially in the neighborhood size.
//!
//! Stored keys per file: the self edge of each SBS (realized when it caches)
//! and, per directed pair `(m, n)`, the joint action "m caches, n does not".
//! Each slot the learner seeds from an embedded independent-learner
//! placement and then runs cyclic best response on the edge estimates.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{CacheMatrix, EdgeRewardTable, ServiceOutcome};
use crate::optimizers::{coordinate_ascent, ScoreFunction};

use super::distributed::DistributedCore;
use super::{
    debug_check_bound, perturbed_term, CachePolicy, InitPattern, InitSchedule, LearnerKind,
    PerturbSpec, PerturbVariant, PolicyBuild, SlotContext, Stat,
};

pub struct EdgeLearner {
    kind: LearnerKind,
    num_sbs: usize,
    num_files: usize,
    cache_size: usize,
    seed_core: DistributedCore,
    gamma: Vec<Vec<usize>>,
    /// Directed cross pairs `(m, n)`, `n` a graph neighbor of `m`.
    cross_pairs: Vec<(usize, usize)>,
    /// `[m][n]` -> index into `cross_pairs`.
    cross_of: Vec<Vec<Option<usize>>>,
    /// `m * F + f` self-edge statistic (joint action: m caches).
    self_stats: Vec<Stat>,
    /// `pair * F + f` cross statistic (joint action: m caches, n does not).
    cross_stats: Vec<Stat>,
    bounds_self: Vec<f64>,
    bounds_cross: Vec<f64>,
    spec: PerturbSpec,
    epsilon: Option<f64>,
    init: InitSchedule,
    eps_mode: bool,
    max_rounds: usize,
    t: u64,
}

impl EdgeLearner {
    pub fn new(kind: LearnerKind, build: &PolicyBuild<'_>, spec: PerturbSpec) -> Self {
        let num_sbs = build.index.num_sbs();
        let gamma = build.graph.gamma.clone();
        let mut cross_pairs = Vec::new();
        let mut cross_of = vec![vec![None; num_sbs]; num_sbs];
        for (m, g) in gamma.iter().enumerate() {
            for &n in g {
                cross_of[m][n] = Some(cross_pairs.len());
                cross_pairs.push((m, n));
            }
        }

        let (bounds_self, cross_map) =
            super::bounds::edge_bounds(build.index, build.delays, build.graph);
        let bounds_cross: Vec<f64> = cross_pairs
            .iter()
            .map(|pair| cross_map.get(pair).copied().unwrap_or(0.0))
            .collect();

        let eps_mode = matches!(spec.variant, PerturbVariant::EpsilonGreedy(_));
        let mut patterns = Vec::new();
        if !eps_mode {
            for f in 0..build.num_files {
                for m in 0..num_sbs {
                    patterns.push(InitPattern {
                        file: f,
                        bits: vec![(m, true)],
                    });
                }
                for &(m, n) in &cross_pairs {
                    let mut bits = vec![(m, true), (n, false)];
                    bits.sort_unstable_by_key(|&(s, _)| s);
                    patterns.push(InitPattern { file: f, bits });
                }
            }
        }

        EdgeLearner {
            kind,
            num_sbs,
            num_files: build.num_files,
            cache_size: build.cache_size,
            seed_core: DistributedCore::new(build, spec),
            gamma,
            self_stats: vec![Stat::default(); num_sbs * build.num_files],
            cross_stats: vec![Stat::default(); cross_pairs.len() * build.num_files],
            cross_pairs,
            cross_of,
            bounds_self,
            bounds_cross,
            spec,
            epsilon: match spec.variant {
                PerturbVariant::EpsilonGreedy(e) => Some(e),
                _ => None,
            },
            init: InitSchedule::new(patterns),
            eps_mode,
            max_rounds: build.ca_max_rounds,
            t: 0,
        }
    }

    /// Stored keys per file: one self edge per SBS plus two per cross edge.
    pub fn num_keys_per_file(&self) -> usize {
        self.num_sbs + self.cross_pairs.len()
    }

    fn estimate_self(&self, m: usize, f: usize) -> f64 {
        let stat = self.self_stats[m * self.num_files + f];
        match self.spec.variant {
            PerturbVariant::EpsilonGreedy(_) => stat.avg,
            v => {
                stat.avg
                    + perturbed_term(v, self.spec.log, self.bounds_self[m], self.t, stat.count)
                        .expect("initialization phase covers every key")
            }
        }
    }

    fn estimate_cross(&self, pair: usize, f: usize) -> f64 {
        let stat = self.cross_stats[pair * self.num_files + f];
        match self.spec.variant {
            PerturbVariant::EpsilonGreedy(_) => stat.avg,
            v => {
                stat.avg
                    + perturbed_term(
                        v,
                        self.spec.log,
                        self.bounds_cross[pair],
                        self.t,
                        stat.count,
                    )
                    .expect("initialization phase covers every key")
            }
        }
    }
}

struct EdgeObjective<'a> {
    l: &'a EdgeLearner,
}

impl ScoreFunction for EdgeObjective<'_> {
    type Value = f64;

    fn evaluate(&self, cache: &CacheMatrix) -> f64 {
        let mut total = 0.0;
        for m in 0..self.l.num_sbs {
            for f in cache.row_files(m) {
                total += self.l.estimate_self(m, f);
                for &n in &self.l.gamma[m] {
                    if !cache.get(n, f) {
                        total += self.l.estimate_cross(self.l.cross_of[m][n].unwrap(), f);
                    }
                }
            }
        }
        total
    }

    fn flip_gain(&self, cache: &CacheMatrix, m: usize, f: usize) -> f64 {
        let mut gain = self.l.estimate_self(m, f);
        for &n in &self.l.gamma[m] {
            if cache.get(n, f) {
                // n's "n caches, m does not" key stops being realized.
                gain -= self.l.estimate_cross(self.l.cross_of[n][m].unwrap(), f);
            } else {
                gain += self.l.estimate_cross(self.l.cross_of[m][n].unwrap(), f);
            }
        }
        gain
    }
}

impl CachePolicy for EdgeLearner {
    fn name(&self) -> &'static str {
        self.kind.as_str()
    }

    fn decide(&mut self, _ctx: &SlotContext<'_>, rng: &mut ChaCha8Rng) -> CacheMatrix {
        if !self.eps_mode && !self.init.is_done() {
            return self
                .init
                .plan_slot(self.num_sbs, self.num_files, self.cache_size);
        }
        self.t += 1;
        if let Some(eps) = self.epsilon {
            if rng.gen::<f64>() < eps {
                return CacheMatrix::random(self.num_sbs, self.num_files, self.cache_size, rng);
            }
        }
        let seed = self.seed_core.placement(self.t, self.cache_size);
        let objective = EdgeObjective { l: self };
        coordinate_ascent(&objective, seed, self.max_rounds)
            .expect("seed placement is budget feasible")
    }

    fn observe(
        &mut self,
        _ctx: &SlotContext<'_>,
        cache: &CacheMatrix,
        outcome: &ServiceOutcome,
        edge_rewards: &EdgeRewardTable,
        _new_files: &[usize],
    ) {
        self.seed_core.update(cache, outcome);
        for m in 0..self.num_sbs {
            for f in cache.row_files(m) {
                let r = edge_rewards.get(&(m, m, f)).copied().unwrap_or(0.0);
                debug_check_bound(r, self.bounds_self[m]);
                self.self_stats[m * self.num_files + f].push(r);
                for &n in &self.gamma[m] {
                    if !cache.get(n, f) {
                        let pair = self.cross_of[m][n].unwrap();
                        let r = edge_rewards.get(&(m, n, f)).copied().unwrap_or(0.0);
                        debug_check_bound(r, self.bounds_cross[pair]);
                        self.cross_stats[pair * self.num_files + f].push(r);
                    }
                }
            }
        }
        if !self.eps_mode {
            self.init.mark_covered(cache);
        }
    }

    fn in_initial_phase(&self) -> bool {
        !self.eps_mode && !self.init.is_done()
    }
}
