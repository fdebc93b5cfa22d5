//! Independent-learner policy: each SBS keeps one statistic per file and
//! picks its top-S estimated files, ignoring the other SBSs entirely.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{CacheMatrix, EdgeRewardTable, ServiceOutcome};
use crate::optimizers::top_s_selection;

use super::{
    debug_check_bound, perturbed_term, CachePolicy, InitPattern, InitSchedule, LearnerKind,
    PerturbSpec, PerturbVariant, PolicyBuild, SlotContext, Stat,
};

/// Per-(SBS, file) statistics shared by the standalone distributed learner
/// and the edge learner's seeding step.
#[derive(Debug, Clone)]
pub(super) struct DistributedCore {
    pub num_sbs: usize,
    pub num_files: usize,
    stats: Vec<Stat>,
    /// Per-SBS reward bound: serving every neighbor user at once.
    bounds: Vec<f64>,
    pub spec: PerturbSpec,
}

impl DistributedCore {
    pub fn new(build: &PolicyBuild<'_>, spec: PerturbSpec) -> Self {
        let num_sbs = build.index.num_sbs();
        let bounds = super::bounds::distributed_bounds(build.index, build.delays);
        DistributedCore {
            num_sbs,
            num_files: build.num_files,
            stats: vec![Stat::default(); num_sbs * build.num_files],
            bounds,
            spec,
        }
    }

    #[inline]
    pub fn stat(&self, m: usize, f: usize) -> Stat {
        self.stats[m * self.num_files + f]
    }

    /// Estimated reward per file for SBS `m` at learner time `t`.
    pub fn estimate_row(&self, m: usize, t: u64) -> Vec<f64> {
        (0..self.num_files)
            .map(|f| {
                let stat = self.stat(m, f);
                match self.spec.variant {
                    PerturbVariant::EpsilonGreedy(_) => stat.avg,
                    v => {
                        stat.avg
                            + perturbed_term(v, self.spec.log, self.bounds[m], t, stat.count)
                                .expect("initialization phase covers every key")
                    }
                }
            })
            .collect()
    }

    /// Top-S placement from the per-file estimates.
    pub fn placement(&self, t: u64, cache_size: usize) -> CacheMatrix {
        let mut cache = CacheMatrix::empty(self.num_sbs, self.num_files, cache_size);
        for m in 0..self.num_sbs {
            let values = self.estimate_row(m, t);
            cache.set_row(m, &top_s_selection(&values, cache_size));
        }
        cache
    }

    /// Folds one slot's observed rewards into every realized key.
    pub fn update(&mut self, cache: &CacheMatrix, outcome: &ServiceOutcome) {
        for m in 0..self.num_sbs {
            for f in cache.row_files(m) {
                let reward = outcome.sbs_file_reward.get(&(m, f)).copied().unwrap_or(0.0);
                debug_check_bound(reward, self.bounds[m]);
                self.stats[m * self.num_files + f].push(reward);
            }
        }
    }
}

/// The standalone independent learner.
pub struct DistributedLearner {
    kind: LearnerKind,
    core: DistributedCore,
    cache_size: usize,
    epsilon: Option<f64>,
    init: Option<InitSchedule>,
    t: u64,
}

impl DistributedLearner {
    pub fn new(kind: LearnerKind, build: &PolicyBuild<'_>, spec: PerturbSpec) -> Self {
        let core = DistributedCore::new(build, spec);
        let epsilon = match spec.variant {
            PerturbVariant::EpsilonGreedy(e) => Some(e),
            _ => None,
        };
        // UCB variants first cache every file once per SBS; the eps variant
        // explores through its random arm instead.
        let init = epsilon.is_none().then(|| {
            let patterns = (0..build.num_files)
                .flat_map(|f| {
                    (0..core.num_sbs).map(move |m| InitPattern {
                        file: f,
                        bits: vec![(m, true)],
                    })
                })
                .collect();
            InitSchedule::new(patterns)
        });
        DistributedLearner {
            kind,
            core,
            cache_size: build.cache_size,
            epsilon,
            init,
            t: 0,
        }
    }
}

impl CachePolicy for DistributedLearner {
    fn name(&self) -> &'static str {
        self.kind.as_str()
    }

    fn decide(&mut self, _ctx: &SlotContext<'_>, rng: &mut ChaCha8Rng) -> CacheMatrix {
        if let Some(init) = &self.init {
            if !init.is_done() {
                return init.plan_slot(self.core.num_sbs, self.core.num_files, self.cache_size);
            }
        }
        self.t += 1;
        if let Some(eps) = self.epsilon {
            if rng.gen::<f64>() < eps {
                return CacheMatrix::random(
                    self.core.num_sbs,
                    self.core.num_files,
                    self.cache_size,
                    rng,
                );
            }
        }
        self.core.placement(self.t, self.cache_size)
    }

    fn observe(
        &mut self,
        _ctx: &SlotContext<'_>,
        cache: &CacheMatrix,
        outcome: &ServiceOutcome,
        _edge_rewards: &EdgeRewardTable,
        _new_files: &[usize],
    ) {
        self.core.update(cache, outcome);
        if let Some(init) = &mut self.init {
            init.mark_covered(cache);
        }
    }

    fn in_initial_phase(&self) -> bool {
        self.init.as_ref().is_some_and(|i| !i.is_done())
    }
}
