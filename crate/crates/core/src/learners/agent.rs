//! Agent-based collaborative learners. Both keep statistics keyed by joint
//! actions over the coordination graph and decide via cyclic best response
//! from a random initial placement.
//!
//! The SBS-perspective learner keys on the full neighbor bit pattern, one
//! statistic per `(m, pattern, f)`. The user-perspective learner merges
//! patterns that cannot change the reward: its keys are `(m, closer-set
//! class, f)`, realized when `m` caches and the whole class does not.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{CacheMatrix, EdgeRewardTable, Server, ServiceOutcome};
use crate::error::{Error, Result};
use crate::optimizers::{coordinate_ascent, ScoreFunction};

use super::bounds::VsetIndex;
use super::{
    debug_check_bound, perturbed_term, CachePolicy, InitPattern, InitSchedule, LearnerKind,
    PerturbSpec, PerturbVariant, PolicyBuild, SlotContext, Stat,
};

/// Joint actions stop being enumerable past this neighborhood size.
const MAX_GAMMA: usize = 20;

// ---------------------------------------------------------------------------
// SBS perspective
// ---------------------------------------------------------------------------

pub struct AgentSbsLearner {
    kind: LearnerKind,
    num_sbs: usize,
    num_files: usize,
    cache_size: usize,
    gamma: Vec<Vec<usize>>,
    /// `[n][m]` -> bit position of SBS `m` within `gamma[n]`.
    gamma_pos: Vec<Vec<Option<u32>>>,
    /// `[m]`: `f * 2^|gamma(m)| + pattern` -> statistic.
    stats: Vec<Vec<Stat>>,
    /// `[m][pattern]` reward bound.
    bounds: Vec<Vec<f64>>,
    spec: PerturbSpec,
    epsilon: Option<f64>,
    init: InitSchedule,
    eps_mode: bool,
    max_rounds: usize,
    t: u64,
}

impl AgentSbsLearner {
    pub fn new(kind: LearnerKind, build: &PolicyBuild<'_>, spec: PerturbSpec) -> Result<Self> {
        let num_sbs = build.index.num_sbs();
        let gamma = build.graph.gamma.clone();
        for (m, g) in gamma.iter().enumerate() {
            if g.len() > MAX_GAMMA {
                return Err(Error::config(
                    "learner",
                    format!(
                        "SBS {m} has {} coordination neighbors; the SBS-perspective joint action space is infeasible",
                        g.len()
                    ),
                ));
            }
        }
        let mut gamma_pos = vec![vec![None; num_sbs]; num_sbs];
        for (n, g) in gamma.iter().enumerate() {
            for (i, &m) in g.iter().enumerate() {
                gamma_pos[n][m] = Some(i as u32);
            }
        }

        let stats = (0..num_sbs)
            .map(|m| vec![Stat::default(); build.num_files << gamma[m].len()])
            .collect();
        let bounds = super::bounds::agent_sbs_bounds(build.index, build.delays, &gamma);

        let eps_mode = matches!(spec.variant, PerturbVariant::EpsilonGreedy(_));
        let mut patterns = Vec::new();
        if !eps_mode {
            for f in 0..build.num_files {
                for (m, g) in gamma.iter().enumerate() {
                    for pat in 0..(1usize << g.len()) {
                        let mut bits = vec![(m, true)];
                        for (i, &n) in g.iter().enumerate() {
                            bits.push((n, pat >> i & 1 == 1));
                        }
                        bits.sort_unstable_by_key(|&(s, _)| s);
                        patterns.push(InitPattern { file: f, bits });
                    }
                }
            }
        }

        Ok(AgentSbsLearner {
            kind,
            num_sbs,
            num_files: build.num_files,
            cache_size: build.cache_size,
            gamma,
            gamma_pos,
            stats,
            bounds,
            spec,
            epsilon: match spec.variant {
                PerturbVariant::EpsilonGreedy(e) => Some(e),
                _ => None,
            },
            init: InitSchedule::new(patterns),
            eps_mode,
            max_rounds: build.ca_max_rounds,
            t: 0,
        })
    }

    #[inline]
    fn pattern_of(&self, cache: &CacheMatrix, m: usize, f: usize) -> usize {
        self.gamma[m]
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &n)| acc | ((cache.get(n, f) as usize) << i))
    }

    /// Total joint-action keys tracked, over all SBSs and files.
    pub fn num_keys(&self) -> usize {
        self.stats.iter().map(Vec::len).sum()
    }

    fn estimate(&self, m: usize, pat: usize, f: usize) -> f64 {
        let npat = 1usize << self.gamma[m].len();
        let stat = self.stats[m][f * npat + pat];
        match self.spec.variant {
            PerturbVariant::EpsilonGreedy(_) => stat.avg,
            v => {
                stat.avg
                    + perturbed_term(v, self.spec.log, self.bounds[m][pat], self.t, stat.count)
                        .expect("initialization phase covers every key")
            }
        }
    }
}

struct AgentSbsObjective<'a> {
    l: &'a AgentSbsLearner,
}

impl ScoreFunction for AgentSbsObjective<'_> {
    type Value = f64;

    fn evaluate(&self, cache: &CacheMatrix) -> f64 {
        let mut total = 0.0;
        for m in 0..self.l.num_sbs {
            for f in cache.row_files(m) {
                total += self.l.estimate(m, self.l.pattern_of(cache, m, f), f);
            }
        }
        total
    }

    fn flip_gain(&self, cache: &CacheMatrix, m: usize, f: usize) -> f64 {
        let mut gain = self.l.estimate(m, self.l.pattern_of(cache, m, f), f);
        for &n in &self.l.gamma[m] {
            if cache.get(n, f) {
                let pat0 = self.l.pattern_of(cache, n, f);
                let bit = 1usize << self.l.gamma_pos[n][m].unwrap();
                gain += self.l.estimate(n, pat0 | bit, f) - self.l.estimate(n, pat0, f);
            }
        }
        gain
    }
}

impl CachePolicy for AgentSbsLearner {
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
        let initial = CacheMatrix::random(self.num_sbs, self.num_files, self.cache_size, rng);
        let objective = AgentSbsObjective { l: self };
        coordinate_ascent(&objective, initial, self.max_rounds)
            .expect("random initial placement is budget feasible")
    }

    fn observe(
        &mut self,
        _ctx: &SlotContext<'_>,
        cache: &CacheMatrix,
        outcome: &ServiceOutcome,
        _edge_rewards: &EdgeRewardTable,
        _new_files: &[usize],
    ) {
        for m in 0..self.num_sbs {
            let npat = 1usize << self.gamma[m].len();
            for f in cache.row_files(m) {
                let pat = self.pattern_of(cache, m, f);
                let reward = outcome.sbs_file_reward.get(&(m, f)).copied().unwrap_or(0.0);
                debug_check_bound(reward, self.bounds[m][pat]);
                self.stats[m][f * npat + pat].push(reward);
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

// ---------------------------------------------------------------------------
// User perspective
// ---------------------------------------------------------------------------

pub struct AgentUserLearner {
    kind: LearnerKind,
    num_sbs: usize,
    num_files: usize,
    cache_size: usize,
    vsets: VsetIndex,
    /// `[m]`: `v * F + f` -> statistic.
    stats: Vec<Vec<Stat>>,
    /// `[m][v]` reward bound: the users of that class.
    bounds: Vec<Vec<f64>>,
    spec: PerturbSpec,
    epsilon: Option<f64>,
    init: InitSchedule,
    eps_mode: bool,
    max_rounds: usize,
    t: u64,
}

impl AgentUserLearner {
    pub fn new(kind: LearnerKind, build: &PolicyBuild<'_>, spec: PerturbSpec) -> Self {
        let num_sbs = build.index.num_sbs();
        let vsets = VsetIndex::build(build.index);
        let bounds = super::bounds::agent_user_bounds(build.index, build.delays, &vsets);
        let stats = (0..num_sbs)
            .map(|m| vec![Stat::default(); vsets.sets[m].len() * build.num_files])
            .collect();

        let eps_mode = matches!(spec.variant, PerturbVariant::EpsilonGreedy(_));
        let mut patterns = Vec::new();
        if !eps_mode {
            for f in 0..build.num_files {
                for m in 0..num_sbs {
                    for v in &vsets.sets[m] {
                        let mut bits = vec![(m, true)];
                        bits.extend(v.iter().map(|&n| (n, false)));
                        bits.sort_unstable_by_key(|&(s, _)| s);
                        patterns.push(InitPattern { file: f, bits });
                    }
                }
            }
        }

        AgentUserLearner {
            kind,
            num_sbs,
            num_files: build.num_files,
            cache_size: build.cache_size,
            vsets,
            stats,
            bounds,
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

    pub fn num_keys(&self) -> usize {
        self.stats.iter().map(Vec::len).sum()
    }

    fn estimate(&self, m: usize, v: usize, f: usize) -> f64 {
        let stat = self.stats[m][v * self.num_files + f];
        match self.spec.variant {
            PerturbVariant::EpsilonGreedy(_) => stat.avg,
            variant => {
                stat.avg
                    + perturbed_term(
                        variant,
                        self.spec.log,
                        self.bounds[m][v],
                        self.t,
                        stat.count,
                    )
                    .expect("initialization phase covers every key")
            }
        }
    }

    /// Key `(m, v)` is realized in a column when `m` caches and the whole
    /// closer-set class does not.
    #[inline]
    fn realized(&self, cache: &CacheMatrix, m: usize, v: usize, f: usize) -> bool {
        self.vsets.sets[m][v].iter().all(|&n| !cache.get(n, f))
    }
}

struct AgentUserObjective<'a> {
    l: &'a AgentUserLearner,
}

impl ScoreFunction for AgentUserObjective<'_> {
    type Value = f64;

    fn evaluate(&self, cache: &CacheMatrix) -> f64 {
        let mut total = 0.0;
        for m in 0..self.l.num_sbs {
            for f in cache.row_files(m) {
                for v in 0..self.l.vsets.sets[m].len() {
                    if self.l.realized(cache, m, v, f) {
                        total += self.l.estimate(m, v, f);
                    }
                }
            }
        }
        total
    }

    fn flip_gain(&self, cache: &CacheMatrix, m: usize, f: usize) -> f64 {
        let mut gain = 0.0;
        for v in 0..self.l.vsets.sets[m].len() {
            if self.l.realized(cache, m, v, f) {
                gain += self.l.estimate(m, v, f);
            }
        }
        // Caching f at m silences every realized key of a caching SBS whose
        // class contains m.
        for n in 0..self.l.num_sbs {
            if n == m || !cache.get(n, f) {
                continue;
            }
            for (v, set) in self.l.vsets.sets[n].iter().enumerate() {
                if set.contains(&m) && self.l.realized(cache, n, v, f) {
                    gain -= self.l.estimate(n, v, f);
                }
            }
        }
        gain
    }
}

impl CachePolicy for AgentUserLearner {
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
        let initial = CacheMatrix::random(self.num_sbs, self.num_files, self.cache_size, rng);
        let objective = AgentUserObjective { l: self };
        coordinate_ascent(&objective, initial, self.max_rounds)
            .expect("random initial placement is budget feasible")
    }

    fn observe(
        &mut self,
        _ctx: &SlotContext<'_>,
        cache: &CacheMatrix,
        outcome: &ServiceOutcome,
        _edge_rewards: &EdgeRewardTable,
        _new_files: &[usize],
    ) {
        // Attribute each served request's reward to its user's class key.
        let mut class_reward: std::collections::HashMap<(usize, usize, usize), f64> =
            std::collections::HashMap::new();
        for req in &outcome.per_request {
            if let Server::Sbs(m) = req.server {
                let v = self.vsets.of_user[m][req.user].expect("server is a neighbor");
                *class_reward.entry((m, v, req.file)).or_insert(0.0) += req.reward;
            }
        }
        for m in 0..self.num_sbs {
            for f in cache.row_files(m) {
                for v in 0..self.vsets.sets[m].len() {
                    if self.realized(cache, m, v, f) {
                        let reward = class_reward.get(&(m, v, f)).copied().unwrap_or(0.0);
                        debug_check_bound(reward, self.bounds[m][v]);
                        self.stats[m][v * self.num_files + f].push(reward);
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
