//! Experiment driver: builds a world per replication, runs the slot loop
//! (decide, serve, assign, observe), records metrics, computes regret, and
//! aggregates across replications.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::config::{ExperimentConfig, MetricMode, Mobility, RandomizeMode, WorkloadMode};
use crate::demand::{
    ingest_trace, sample_stationary_requests, update_active_files, zipf_preferences,
    ActiveFileSet, PreferenceMatrix, RequestBatch, RequestStream, TraceData, ZipfExponents,
};
use crate::env::{
    assign_edge_rewards, expected_reward, serve_requests, ExpectedRewardScore,
};
use crate::error::{Error, Result};
use crate::learners::{build_policy, oracle_coordinate_ascent, PolicyBuild, SlotContext};
use crate::rng::{replication_seed, stream_rng, tag};
use crate::topology::{
    build_coordination_graph, build_neighbor_index, compute_delay_model, CoordinationGraph,
    DelayModel, NeighborIndex, Point, RadioParams, Topology,
};

/// Metrics recorded for one slot.
#[derive(Debug, Clone)]
pub struct SlotMetrics {
    /// 1-based slot number.
    pub slot: usize,
    /// True when the policy was still in its initialization phase.
    pub init_phase: bool,
    pub delay: f64,
    pub reward: f64,
    pub requests: usize,
    /// Running average delay under the configured metric mode.
    pub avg_delay: f64,
    /// Expected per-slot reward of the chosen placement (stationary mode).
    pub expected_reward: Option<f64>,
    /// Cumulative oracle gap on expected rewards, post-initialization.
    pub regret: Option<f64>,
    /// Same accumulation on sampled rewards, for comparison.
    pub regret_sampled: Option<f64>,
    /// |delay + reward - requests * d0| for this slot.
    pub conservation_residual: f64,
    pub decision_time_s: f64,
}

/// One replication's series.
#[derive(Debug, Clone)]
pub struct ReplicationSeries {
    pub replication: usize,
    pub seed: u64,
    /// Expected per-slot reward of the oracle placement (stationary mode).
    pub oracle_value: Option<f64>,
    /// Number of leading initialization slots.
    pub init_slots: usize,
    pub slots: Vec<SlotMetrics>,
}

impl ReplicationSeries {
    pub fn final_regret(&self) -> Option<f64> {
        self.slots.last().and_then(|s| s.regret)
    }

    pub fn final_avg_delay(&self) -> f64 {
        self.slots.last().map_or(0.0, |s| s.avg_delay)
    }

    /// Mean per-slot delay over the last `window` slots.
    pub fn tail_mean_delay(&self, window: usize) -> f64 {
        let n = self.slots.len();
        let start = n.saturating_sub(window);
        let tail = &self.slots[start..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().map(|s| s.delay).sum::<f64>() / tail.len() as f64
    }
}

/// Pointwise aggregate over replications.
#[derive(Debug, Clone)]
pub struct AggregateRow {
    pub slot: usize,
    pub mean_delay: f64,
    pub std_delay: f64,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub mean_requests: f64,
    pub std_requests: f64,
    pub mean_avg_delay: f64,
    pub std_avg_delay: f64,
    pub mean_regret: Option<f64>,
    pub std_regret: Option<f64>,
}

/// Full result of a run: per-replication series plus their aggregate.
#[derive(Debug, Clone)]
pub struct MetricsSeries {
    pub learner: String,
    pub replications: Vec<ReplicationSeries>,
    pub aggregate: Vec<AggregateRow>,
}

/// Cumulative oracle gap over the per-slot expected rewards of the chosen
/// placements. Initialization slots contribute zero and are excluded from
/// the accumulation; fails when expected rewards are unavailable (traces).
pub fn compute_regret(slots: &[SlotMetrics], oracle_value: f64) -> Result<Vec<f64>> {
    let mut curve = Vec::with_capacity(slots.len());
    let mut acc = 0.0;
    for s in slots {
        if !s.init_phase {
            let expected = s.expected_reward.ok_or(Error::RegretUnavailable)?;
            acc += oracle_value - expected;
        }
        curve.push(acc);
    }
    Ok(curve)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Pointwise mean and standard deviation across replications.
pub fn aggregate_replications(replications: &[ReplicationSeries]) -> Result<Vec<AggregateRow>> {
    let Some(first) = replications.first() else {
        return Ok(Vec::new());
    };
    let len = first.slots.len();
    for r in replications {
        if r.slots.len() != len {
            return Err(Error::LengthMismatch(len, r.slots.len()));
        }
    }
    let mut rows = Vec::with_capacity(len);
    for i in 0..len {
        let col = |f: &dyn Fn(&SlotMetrics) -> f64| -> Vec<f64> {
            replications.iter().map(|r| f(&r.slots[i])).collect()
        };
        let (mean_delay, std_delay) = mean_std(&col(&|s| s.delay));
        let (mean_reward, std_reward) = mean_std(&col(&|s| s.reward));
        let (mean_requests, std_requests) = mean_std(&col(&|s| s.requests as f64));
        let (mean_avg_delay, std_avg_delay) = mean_std(&col(&|s| s.avg_delay));
        let regrets: Vec<f64> = replications
            .iter()
            .filter_map(|r| r.slots[i].regret)
            .collect();
        let (mean_regret, std_regret) = if regrets.len() == replications.len() {
            let (m, s) = mean_std(&regrets);
            (Some(m), Some(s))
        } else {
            (None, None)
        };
        rows.push(AggregateRow {
            slot: first.slots[i].slot,
            mean_delay,
            std_delay,
            mean_reward,
            std_reward,
            mean_requests,
            std_requests,
            mean_avg_delay,
            std_avg_delay,
            mean_regret,
            std_regret,
        });
    }
    Ok(rows)
}

/// Per-replication seed list: explicit from the config, or derived from the
/// master seed.
pub fn seed_list(cfg: &ExperimentConfig) -> Vec<u64> {
    match &cfg.seeds {
        Some(seeds) => seeds.clone(),
        None => (0..cfg.replications)
            .map(|k| replication_seed(cfg.seed, k))
            .collect(),
    }
}

struct World {
    topology: Topology,
    index: NeighborIndex,
    graph: CoordinationGraph,
    delays: DelayModel,
    prefs: Option<PreferenceMatrix>,
    num_files: usize,
}

fn radio_params(cfg: &ExperimentConfig) -> RadioParams {
    RadioParams {
        power_w: cfg.radio.power_w,
        noise_w: cfg.radio.noise_w,
        path_loss_exp: cfg.radio.path_loss_exp,
        bandwidth_hz: cfg.radio.bandwidth_hz,
    }
}

fn points_from(coords: &[[f64; 2]]) -> Vec<Point> {
    coords.iter().map(|c| Point { x: c[0], y: c[1] }).collect()
}

fn sample_points(region: f64, n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<Point> {
    use rand::Rng;
    (0..n)
        .map(|_| Point {
            x: rng.gen_range(0.0..region),
            y: rng.gen_range(0.0..region),
        })
        .collect()
}

/// Base seed of environment draws (placement, preferences): shared across
/// replications under `requests_only`, per-replication otherwise.
fn environment_base(cfg: &ExperimentConfig, rep_seed: u64) -> u64 {
    match cfg.randomize {
        RandomizeMode::RequestsOnly => cfg.seed,
        RandomizeMode::PlacementAndRequests => rep_seed,
    }
}

fn build_world(
    cfg: &ExperimentConfig,
    rep_seed: u64,
    trace: Option<&TraceData>,
) -> Result<World> {
    let env_base = environment_base(cfg, rep_seed);
    let num_users = match trace {
        Some(t) => t.num_users,
        None => cfg.topology.users,
    };
    let sbs_positions = match &cfg.topology.sbs_positions {
        Some(coords) => points_from(coords),
        None => sample_points(
            cfg.topology.region,
            cfg.topology.sbs,
            &mut stream_rng(&[env_base, tag::PLACEMENT, 0]),
        ),
    };
    let user_positions = match &cfg.topology.user_positions {
        Some(coords) => points_from(coords),
        None => sample_points(
            cfg.topology.region,
            num_users,
            &mut stream_rng(&[env_base, tag::PLACEMENT, 1]),
        ),
    };
    let topology = Topology::new(sbs_positions, user_positions, cfg.topology.comm_radius);
    let index = build_neighbor_index(&topology);
    let graph = build_coordination_graph(&index);
    let delays = compute_delay_model(&topology, &index, radio_params(cfg), cfg.radio.core_delay_s)?;

    let (prefs, num_files) = match trace {
        Some(t) => (None, t.num_files),
        None => {
            let prefs = zipf_preferences(
                num_users,
                cfg.workload.files,
                &ZipfExponents::DrawnFrom(cfg.workload.zipf_set.clone()),
                env_base,
            );
            (Some(prefs), cfg.workload.files)
        }
    };

    Ok(World {
        topology,
        index,
        graph,
        delays,
        prefs,
        num_files,
    })
}

/// Topology of one replication, as the run would build it. Useful for
/// exporting positions next to the metrics.
pub fn replication_topology(cfg: &ExperimentConfig, replication: usize) -> Result<Topology> {
    cfg.validate()?;
    let trace = load_trace(cfg)?;
    let seeds = seed_list(cfg);
    let world = build_world(cfg, seeds[replication], trace.as_deref())?;
    Ok(world.topology)
}

fn load_trace(cfg: &ExperimentConfig) -> Result<Option<Arc<TraceData>>> {
    match cfg.workload.mode {
        WorkloadMode::Zipf => Ok(None),
        WorkloadMode::Trace => {
            let path = cfg
                .workload
                .trace_path
                .as_ref()
                .expect("validated: trace mode has a path");
            let data = ingest_trace(
                path,
                cfg.workload.slot_length_s,
                cfg.workload.user_cap,
                cfg.workload.trace_format,
            )?;
            Ok(Some(Arc::new(data)))
        }
    }
}

fn run_replication(
    cfg: &ExperimentConfig,
    replication: usize,
    rep_seed: u64,
    trace: Option<&TraceData>,
    t_total: usize,
) -> Result<ReplicationSeries> {
    let world = build_world(cfg, rep_seed, trace)?;
    let metric_mode = cfg.metric_mode();
    let env_base = environment_base(cfg, rep_seed);

    // The oracle placement doubles as the regret reference; an oracle learner
    // reproduces it exactly because both draw from an identically seeded
    // stream. Keyed like the environment, so a shared environment shares its
    // oracle.
    let oracle_value = match &world.prefs {
        Some(prefs) => {
            let score = ExpectedRewardScore {
                prefs,
                index: &world.index,
                delays: &world.delays,
            };
            let matrix = oracle_coordinate_ascent(
                &score,
                world.topology.num_sbs(),
                world.num_files,
                cfg.cache_size(),
                cfg.oracle.restarts,
                cfg.ca.max_rounds,
                &mut stream_rng(&[env_base, tag::ORACLE]),
            )?;
            Some(expected_reward(&matrix, prefs, &world.index, &world.delays).0)
        }
        None => None,
    };

    let build = PolicyBuild {
        index: &world.index,
        delays: &world.delays,
        graph: &world.graph,
        num_files: world.num_files,
        cache_size: cfg.cache_size(),
        epsilon: cfg.epsilon,
        log: cfg.log_variant,
        ca_max_rounds: cfg.ca.max_rounds,
        oracle_restarts: cfg.oracle.restarts,
        prefs: world.prefs.as_ref(),
    };
    let mut policy =
        build_policy(cfg.learner, &build, &mut stream_rng(&[env_base, tag::ORACLE]))?;

    let request_stream = RequestStream::new(rep_seed);
    let mobility = trace.is_some() && cfg.workload.mobility == Mobility::PerSlot;

    let mut active = ActiveFileSet::default();
    let mut slots = Vec::with_capacity(t_total);
    let mut cum_delay = 0.0;
    let mut cum_requests = 0usize;
    let mut init_slots = 0usize;

    // Per-slot world structures; rebuilt under mobility.
    let mut slot_topology;
    let mut slot_index = world.index.clone();
    let mut slot_delays = world.delays.clone();
    let mut slot_graph = world.graph.clone();

    for t in 1..=t_total {
        if mobility {
            let users = sample_points(
                cfg.topology.region,
                world.topology.num_users(),
                &mut stream_rng(&[env_base, tag::MOBILITY, t as u64]),
            );
            slot_topology = Topology::new(
                world.topology.sbs_positions.clone(),
                users,
                cfg.topology.comm_radius,
            );
            slot_index = build_neighbor_index(&slot_topology);
            slot_delays = compute_delay_model(
                &slot_topology,
                &slot_index,
                radio_params(cfg),
                // Keep the fallback delay stable across slots.
                cfg.radio.core_delay_s.or(Some(world.delays.core_delay)),
            )?;
            slot_graph = build_coordination_graph(&slot_index);
        }
        let ctx = SlotContext {
            t,
            index: &slot_index,
            delays: &slot_delays,
            graph: &slot_graph,
        };

        let init_phase = policy.in_initial_phase();
        let started = Instant::now();
        let cache = policy.decide(&ctx, &mut stream_rng(&[rep_seed, tag::DECIDE, t as u64]));
        let decision_time_s = started.elapsed().as_secs_f64();
        debug_assert!(cache.is_budget_feasible(), "policy exceeded the budget");

        let batch: RequestBatch = match trace {
            Some(data) => data.batches[t - 1].clone(),
            None => sample_stationary_requests(
                world.prefs.as_ref().expect("zipf mode has preferences"),
                t,
                &request_stream,
            ),
        };

        let outcome = serve_requests(&cache, &batch, &slot_index, &slot_delays);
        let edge_rewards = assign_edge_rewards(&outcome, &slot_index, &slot_graph);
        let new_files = update_active_files(&mut active, &batch);
        policy.observe(&ctx, &cache, &outcome, &edge_rewards, &new_files);

        let expected = world
            .prefs
            .as_ref()
            .map(|prefs| expected_reward(&cache, prefs, &slot_index, &slot_delays).0);

        cum_delay += outcome.slot_delay;
        cum_requests += outcome.num_requests;
        let avg_delay = match metric_mode {
            MetricMode::PerSlot => cum_delay / t as f64,
            MetricMode::PerRequest => {
                if cum_requests == 0 {
                    0.0
                } else {
                    cum_delay / cum_requests as f64
                }
            }
        };
        let residual = (outcome.slot_delay + outcome.total_reward
            - outcome.num_requests as f64 * slot_delays.core_delay)
            .abs();
        if init_phase {
            init_slots += 1;
        }

        slots.push(SlotMetrics {
            slot: t,
            init_phase,
            delay: outcome.slot_delay,
            reward: outcome.total_reward,
            requests: outcome.num_requests,
            avg_delay,
            expected_reward: expected,
            regret: None,
            regret_sampled: None,
            conservation_residual: residual,
            decision_time_s,
        });
    }

    if let Some(oracle) = oracle_value {
        let curve = compute_regret(&slots, oracle)?;
        let mut acc = 0.0;
        for (s, regret) in slots.iter_mut().zip(curve) {
            s.regret = Some(regret);
            if !s.init_phase {
                acc += oracle - s.reward;
            }
            s.regret_sampled = Some(acc);
        }
    }

    Ok(ReplicationSeries {
        replication,
        seed: rep_seed,
        oracle_value,
        init_slots,
        slots,
    })
}

/// Runs all replications of a configured experiment, in parallel, and
/// aggregates them. Fully deterministic given the config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsSeries> {
    cfg.validate()?;
    let trace = load_trace(cfg)?;
    let t_total = match &trace {
        Some(data) => cfg.t_total.min(data.num_slots),
        None => cfg.t_total,
    };
    let seeds = seed_list(cfg);

    let replications: Vec<ReplicationSeries> = (0..cfg.replications)
        .into_par_iter()
        .map(|k| {
            run_replication(cfg, k, seeds[k], trace.as_deref(), t_total).map_err(|e| {
                Error::Replication {
                    replication: k,
                    source: Box::new(e),
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let aggregate = aggregate_replications(&replications)?;
    Ok(MetricsSeries {
        learner: cfg.learner.to_string(),
        replications,
        aggregate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    fn small_cfg(learner: &str) -> ExperimentConfig {
        let raw = format!(
            r#"
learner = "{learner}"
seed = 7
t_total = 40
replications = 2

[topology]
sbs = 2
users = 6
comm_radius = 60.0

[workload]
files = 8
zipf_set = [0.9]

[cache]
size = 2

[oracle]
restarts = 20
"#
        );
        parse_config_str(&raw).unwrap()
    }

    #[test]
    fn one_slot_lru_smoke() {
        let mut cfg = small_cfg("lru");
        cfg.t_total = 1;
        cfg.replications = 1;
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.replications.len(), 1);
        assert_eq!(out.replications[0].slots.len(), 1);
        assert_eq!(out.aggregate.len(), 1);
    }

    #[test]
    fn identical_configs_give_identical_series() {
        let cfg = small_cfg("edge_v2");
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        for (ra, rb) in a.replications.iter().zip(&b.replications) {
            assert_eq!(ra.seed, rb.seed);
            for (sa, sb) in ra.slots.iter().zip(&rb.slots) {
                assert_eq!(sa.delay, sb.delay);
                assert_eq!(sa.reward, sb.reward);
                assert_eq!(sa.regret, sb.regret);
            }
        }
    }

    #[test]
    fn conservation_holds_every_slot() {
        for learner in ["distributed", "edge_v2", "lfu", "cucb", "modified_edge"] {
            let out = run_experiment(&small_cfg(learner)).unwrap();
            for rep in &out.replications {
                for s in &rep.slots {
                    let budget = s.requests as f64;
                    assert!(
                        s.conservation_residual <= 1e-9 * budget.max(1.0),
                        "learner {learner} slot {} residual {}",
                        s.slot,
                        s.conservation_residual
                    );
                }
            }
        }
    }

    #[test]
    fn oracle_learner_has_zero_regret() {
        let out = run_experiment(&small_cfg("oracle_ca")).unwrap();
        for rep in &out.replications {
            let final_regret = rep.final_regret().unwrap();
            assert!(
                final_regret.abs() < 1e-9,
                "oracle regret should vanish, got {final_regret}"
            );
        }
    }

    #[test]
    fn regret_is_non_decreasing() {
        for learner in ["distributed_v2", "edge", "lru"] {
            let out = run_experiment(&small_cfg(learner)).unwrap();
            for rep in &out.replications {
                let mut last = 0.0;
                for s in &rep.slots {
                    let r = s.regret.unwrap();
                    assert!(r >= last - 1e-9, "{learner}: regret decreased");
                    last = r;
                }
            }
        }
    }

    #[test]
    fn random_policy_regret_grows_linearly() {
        // epsilon = 1 caches uniformly at random every slot; its expected
        // per-slot gap is the oracle value minus the mean placement value.
        let mut cfg = small_cfg("distributed_eps");
        cfg.epsilon = 1.0;
        cfg.t_total = 400;
        let out = run_experiment(&cfg).unwrap();
        for rep in &out.replications {
            let total = rep.final_regret().unwrap();
            let per_slot = total / rep.slots.len() as f64;
            let oracle = rep.oracle_value.unwrap();
            // The random-placement gap is positive and below the oracle value.
            assert!(per_slot > 0.0 && per_slot < oracle);

            // Slope estimate from the second half matches the first half
            // within Monte Carlo noise: linear growth.
            let n = rep.slots.len();
            let half = rep.slots[n / 2].regret.unwrap();
            let first = half / (n / 2) as f64;
            let second = (total - half) / (n - n / 2) as f64;
            let scale = per_slot.max(1e-12);
            assert!(
                (first - second).abs() / scale < 0.5,
                "slopes diverge: {first} vs {second}"
            );
        }
    }

    #[test]
    fn seed_isolation_across_replications() {
        let mut cfg = small_cfg("distributed_v2");
        cfg.replications = 3;
        cfg.seeds = Some(vec![11, 22, 33]);
        let a = run_experiment(&cfg).unwrap();
        cfg.seeds = Some(vec![11, 99, 33]);
        let b = run_experiment(&cfg).unwrap();
        for k in [0usize, 2] {
            for (sa, sb) in a.replications[k].slots.iter().zip(&b.replications[k].slots) {
                assert_eq!(sa.delay, sb.delay);
                assert_eq!(sa.reward, sb.reward);
            }
        }
        let diff = a.replications[1]
            .slots
            .iter()
            .zip(&b.replications[1].slots)
            .any(|(sa, sb)| sa.delay != sb.delay);
        assert!(diff, "changing replication 1's seed must change its series");
    }

    #[test]
    fn aggregate_mean_and_std() {
        let cfg = small_cfg("lfu");
        let out = run_experiment(&cfg).unwrap();
        let k = out.replications.len() as f64;
        for (i, row) in out.aggregate.iter().enumerate() {
            let mean: f64 = out
                .replications
                .iter()
                .map(|r| r.slots[i].delay)
                .sum::<f64>()
                / k;
            assert!((row.mean_delay - mean).abs() < 1e-12);
        }
        // Single replication: mean is the series, std is zero.
        let mut one = cfg.clone();
        one.replications = 1;
        one.seeds = None;
        let out = run_experiment(&one).unwrap();
        for (i, row) in out.aggregate.iter().enumerate() {
            assert_eq!(row.mean_delay, out.replications[0].slots[i].delay);
            assert_eq!(row.std_delay, 0.0);
        }
    }

    #[test]
    fn requests_only_mode_shares_environment_across_replications() {
        let mut cfg = small_cfg("lfu");
        cfg.randomize = crate::config::RandomizeMode::RequestsOnly;
        cfg.replications = 3;
        let out = run_experiment(&cfg).unwrap();
        // Same placement and preferences imply one oracle value for all
        // replications; request draws still differ.
        let oracle = out.replications[0].oracle_value.unwrap();
        for rep in &out.replications {
            assert_eq!(rep.oracle_value.unwrap(), oracle);
        }
        let differs = out.replications[0]
            .slots
            .iter()
            .zip(&out.replications[1].slots)
            .any(|(a, b)| a.delay != b.delay);
        assert!(differs, "request draws should differ across replications");
    }

    #[test]
    fn aggregate_rejects_mismatched_lengths() {
        let cfg = small_cfg("lfu");
        let out = run_experiment(&cfg).unwrap();
        let mut reps = out.replications.clone();
        reps[1].slots.pop();
        assert!(matches!(
            aggregate_replications(&reps),
            Err(Error::LengthMismatch(..))
        ));
    }

    #[test]
    fn per_slot_mobility_runs_deterministically() {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for day in 0..8 {
            for user in 0..5 {
                writeln!(f, "{},{},{}", user + 1, (user * day) % 7, day * 86_400 + 60).unwrap();
            }
        }
        let raw = format!(
            r#"
learner = "modified_edge"
replications = 2
t_total = 8

[topology]
sbs = 3
comm_radius = 45.0

[workload]
mode = "trace"
trace_path = "{}"
mobility = "per_slot"

[cache]
size = 2

[radio]
core_delay_s = 2.0
"#,
            f.path().display()
        );
        let cfg = parse_config_str(&raw).unwrap();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        for (ra, rb) in a.replications.iter().zip(&b.replications) {
            for (sa, sb) in ra.slots.iter().zip(&rb.slots) {
                assert_eq!(sa.delay, sb.delay);
                let budget = sa.requests as f64 * 2.0;
                assert!(sa.conservation_residual <= 1e-9 * budget.max(1.0));
            }
        }
    }

    #[test]
    fn trace_mode_has_no_regret() {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for day in 0..5 {
            for user in 0..4 {
                writeln!(f, "{}::{}::3::{}", user + 1, (user + day) % 6 + 1, day * 86_400 + 10)
                    .unwrap();
            }
        }
        let raw = format!(
            r#"
learner = "modified_edge"
t_total = 10
replications = 1

[topology]
sbs = 2
comm_radius = 60.0

[workload]
mode = "trace"
trace_path = "{}"

[cache]
size = 2
"#,
            f.path().display()
        );
        let cfg = parse_config_str(&raw).unwrap();
        let out = run_experiment(&cfg).unwrap();
        let rep = &out.replications[0];
        // 5 days of data truncate the horizon.
        assert_eq!(rep.slots.len(), 5);
        assert!(rep.oracle_value.is_none());
        assert!(rep.slots.iter().all(|s| s.regret.is_none()));
        assert!(compute_regret(&rep.slots, 1.0).is_err());
    }
}
