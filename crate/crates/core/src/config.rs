//! Experiment configuration: TOML schema, defaults, and validation.
//!
//! An empty config file resolves to the standard stationary setup: a 100 m
//! square with 6 SBSs and 50 users, 50 m communication radius, 10 MHz
//! bandwidth at 1 W transmit power over unit noise with path loss exponent 4,
//! a 100-file library with 10-file caches, and 25000 slots averaged over 30
//! replications.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::demand::{TraceFormat, DEFAULT_ZIPF_SET};
use crate::error::{Error, Result};
use crate::learners::{LearnerKind, LogVariant};

/// Denominator of the average-delay curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMode {
    /// Cumulative delay over slots elapsed.
    PerSlot,
    /// Cumulative delay over requests served.
    PerRequest,
}

/// What re-randomizes across replications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomizeMode {
    /// Placement and preferences are shared; only request draws differ.
    RequestsOnly,
    /// Every replication draws fresh placement, preferences, and requests.
    #[default]
    PlacementAndRequests,
}

/// User location dynamics in trace mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mobility {
    #[default]
    Static,
    PerSlot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyConfig {
    /// Side of the square deployment region, meters.
    pub region: f64,
    pub sbs: usize,
    pub users: usize,
    pub comm_radius: f64,
    /// Explicit coordinates override random placement.
    pub sbs_positions: Option<Vec<[f64; 2]>>,
    pub user_positions: Option<Vec<[f64; 2]>>,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig {
            region: 100.0,
            sbs: 6,
            users: 50,
            comm_radius: 50.0,
            sbs_positions: None,
            user_positions: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioConfig {
    pub bandwidth_hz: f64,
    pub power_w: f64,
    pub noise_w: f64,
    pub path_loss_exp: f64,
    /// Pins the core-network delay; the default rule is three times the
    /// worst in-range link delay.
    pub core_delay_s: Option<f64>,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            bandwidth_hz: 1.0e7,
            power_w: 1.0,
            noise_w: 1.0,
            path_loss_exp: 4.0,
            core_delay_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CacheConfig {
    /// Files each SBS can hold.
    pub size: i64,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig { size: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadMode {
    #[default]
    Zipf,
    Trace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadConfig {
    pub mode: WorkloadMode,
    /// Library size (zipf mode; trace mode derives it from the data).
    pub files: usize,
    /// Exponent set users draw from.
    pub zipf_set: Vec<f64>,
    pub trace_path: Option<PathBuf>,
    pub trace_format: TraceFormat,
    pub slot_length_s: u64,
    /// Keep only this many users (ascending raw id) from the trace.
    pub user_cap: Option<usize>,
    pub mobility: Mobility,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            mode: WorkloadMode::Zipf,
            files: 100,
            zipf_set: DEFAULT_ZIPF_SET.to_vec(),
            trace_path: None,
            trace_format: TraceFormat::Auto,
            slot_length_s: 86_400,
            user_cap: None,
            mobility: Mobility::Static,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// Random restarts of the oracle's best-response search.
    pub restarts: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { restarts: 300 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaConfig {
    /// Full best-response passes before the anytime cutoff.
    pub max_rounds: usize,
}

impl Default for CaConfig {
    fn default() -> Self {
        CaConfig { max_rounds: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BruteForceConfig {
    /// Largest candidate count the exhaustive oracle accepts.
    pub cap: u64,
}

impl Default for BruteForceConfig {
    fn default() -> Self {
        BruteForceConfig { cap: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Explicit per-replication seeds; derived from `seed` when absent.
    pub seeds: Option<Vec<u64>>,
    pub t_total: usize,
    pub replications: usize,
    /// Defaults to per-slot for zipf workloads and per-request for traces.
    pub metric_mode: Option<MetricMode>,
    pub randomize: RandomizeMode,
    pub learner: LearnerKind,
    pub epsilon: f64,
    pub log_variant: LogVariant,
    pub topology: TopologyConfig,
    pub radio: RadioConfig,
    pub cache: CacheConfig,
    pub workload: WorkloadConfig,
    pub oracle: OracleConfig,
    pub ca: CaConfig,
    pub bruteforce: BruteForceConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            seeds: None,
            t_total: 25_000,
            replications: 30,
            metric_mode: None,
            randomize: RandomizeMode::default(),
            learner: LearnerKind::EdgeV2,
            epsilon: 0.05,
            log_variant: LogVariant::default(),
            topology: TopologyConfig::default(),
            radio: RadioConfig::default(),
            cache: CacheConfig::default(),
            workload: WorkloadConfig::default(),
            oracle: OracleConfig::default(),
            ca: CaConfig::default(),
            bruteforce: BruteForceConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn cache_size(&self) -> usize {
        self.cache.size as usize
    }

    pub fn metric_mode(&self) -> MetricMode {
        self.metric_mode.unwrap_or(match self.workload.mode {
            WorkloadMode::Zipf => MetricMode::PerSlot,
            WorkloadMode::Trace => MetricMode::PerRequest,
        })
    }

    // Negated comparisons are deliberate: NaN must fail validation.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let err = |key: &str, message: String| Error::config(key, message);
        if self.t_total < 1 {
            return Err(err("t_total", "must be at least 1".to_string()));
        }
        if self.replications < 1 {
            return Err(err("replications", "must be at least 1".to_string()));
        }
        if let Some(seeds) = &self.seeds {
            if seeds.len() != self.replications {
                return Err(err(
                    "seeds",
                    format!(
                        "expected {} entries (one per replication), got {}",
                        self.replications,
                        seeds.len()
                    ),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(err("epsilon", "must lie in [0, 1]".to_string()));
        }

        let t = &self.topology;
        if t.sbs < 1 {
            return Err(err("topology.sbs", "must be at least 1".to_string()));
        }
        if t.users < 1 && self.workload.mode == WorkloadMode::Zipf {
            return Err(err("topology.users", "must be at least 1".to_string()));
        }
        if !(t.comm_radius > 0.0) {
            return Err(err("topology.comm_radius", "must be positive".to_string()));
        }
        if !(t.region > 0.0) {
            return Err(err("topology.region", "must be positive".to_string()));
        }
        if let Some(p) = &t.sbs_positions {
            if p.len() != t.sbs {
                return Err(err(
                    "topology.sbs_positions",
                    format!("expected {} coordinates, got {}", t.sbs, p.len()),
                ));
            }
        }
        if let Some(p) = &t.user_positions {
            if self.workload.mode == WorkloadMode::Trace {
                return Err(err(
                    "topology.user_positions",
                    "trace mode derives its user population from the trace".to_string(),
                ));
            }
            if p.len() != t.users {
                return Err(err(
                    "topology.user_positions",
                    format!("expected {} coordinates, got {}", t.users, p.len()),
                ));
            }
        }

        let r = &self.radio;
        if !(r.bandwidth_hz > 0.0) {
            return Err(err("radio.bandwidth_hz", "must be positive".to_string()));
        }
        if !(r.power_w > 0.0) {
            return Err(err("radio.power_w", "must be positive".to_string()));
        }
        if !(r.noise_w > 0.0) {
            return Err(err("radio.noise_w", "must be positive".to_string()));
        }
        if !(r.path_loss_exp > 2.0) {
            return Err(err("radio.path_loss_exp", "must exceed 2".to_string()));
        }
        if let Some(d0) = r.core_delay_s {
            if !(d0 > 0.0) {
                return Err(err("radio.core_delay_s", "must be positive".to_string()));
            }
        }

        if self.cache.size < 1 {
            return Err(err("cache.size", "must be at least 1".to_string()));
        }

        let w = &self.workload;
        match w.mode {
            WorkloadMode::Zipf => {
                if w.files < 1 {
                    return Err(err("workload.files", "must be at least 1".to_string()));
                }
                if self.cache.size as usize > w.files {
                    return Err(err(
                        "cache.size",
                        format!("must not exceed the library size {}", w.files),
                    ));
                }
                if w.zipf_set.is_empty() {
                    return Err(err("workload.zipf_set", "must not be empty".to_string()));
                }
                if w.zipf_set.iter().any(|&d| d < 0.0) {
                    return Err(err("workload.zipf_set", "exponents must be non-negative".to_string()));
                }
                if w.mobility == Mobility::PerSlot {
                    return Err(err(
                        "workload.mobility",
                        "per-slot mobility applies to trace workloads only".to_string(),
                    ));
                }
            }
            WorkloadMode::Trace => {
                if w.trace_path.is_none() {
                    return Err(err("workload.trace_path", "required in trace mode".to_string()));
                }
                if w.slot_length_s == 0 {
                    return Err(err("workload.slot_length_s", "must be positive".to_string()));
                }
                if self.learner.needs_preferences() {
                    return Err(err(
                        "learner",
                        format!("{} requires a stationary workload", self.learner),
                    ));
                }
            }
        }
        if w.mobility == Mobility::PerSlot && self.learner.needs_static_delays() {
            return Err(Error::MobilityUnsupported {
                learner: self.learner.to_string(),
            });
        }

        if self.oracle.restarts < 1 {
            return Err(err("oracle.restarts", "must be at least 1".to_string()));
        }
        if self.ca.max_rounds < 1 {
            return Err(err("ca.max_rounds", "must be at least 1".to_string()));
        }
        Ok(())
    }
}

/// Parses a TOML config string; unknown keys are rejected.
pub fn parse_config_str(raw: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        toml::from_str(raw).map_err(|e| Error::ConfigParse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and validates a config file; an empty file means all defaults.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let raw = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("read config {}", path.display()), e))?;
    parse_config_str(&raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg = parse_config_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.topology.sbs, 6);
        assert_eq!(cfg.topology.users, 50);
        assert_eq!(cfg.topology.comm_radius, 50.0);
        assert_eq!(cfg.workload.files, 100);
        assert_eq!(cfg.cache.size, 10);
        assert_eq!(cfg.t_total, 25_000);
        assert_eq!(cfg.replications, 30);
        assert_eq!(cfg.epsilon, 0.05);
        assert_eq!(cfg.radio.bandwidth_hz, 1.0e7);
        assert_eq!(cfg.radio.power_w, 1.0);
        assert_eq!(cfg.radio.noise_w, 1.0);
        assert_eq!(cfg.radio.path_loss_exp, 4.0);
    }

    #[test]
    fn negative_cache_size_is_rejected() {
        let err = parse_config_str("[cache]\nsize = -1\n").unwrap_err();
        assert!(err.to_string().contains("cache.size"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_config_str("unknown_key = 3\n").is_err());
        assert!(parse_config_str("[workload]\nbanana = true\n").is_err());
    }

    #[test]
    fn learner_strings_map_to_variants() {
        let cfg = parse_config_str("learner = \"edge_v2\"\n").unwrap();
        assert_eq!(cfg.learner, LearnerKind::EdgeV2);
        let cfg = parse_config_str("learner = \"modified_distributed\"\n").unwrap();
        assert_eq!(cfg.learner, LearnerKind::ModifiedDistributed);
        assert!(parse_config_str("learner = \"sgd\"\n").is_err());
    }

    #[test]
    fn trace_mode_requires_path() {
        let err = parse_config_str("[workload]\nmode = \"trace\"\n").unwrap_err();
        assert!(err.to_string().contains("trace_path"), "{err}");
    }

    #[test]
    fn mobility_rejects_static_bound_learners() {
        let raw = "learner = \"edge_v2\"\n[workload]\nmode = \"trace\"\ntrace_path = \"x.dat\"\nmobility = \"per_slot\"\n";
        let err = parse_config_str(raw).unwrap_err();
        assert!(matches!(err, Error::MobilityUnsupported { .. }));
        let raw = "learner = \"modified_edge\"\n[workload]\nmode = \"trace\"\ntrace_path = \"x.dat\"\nmobility = \"per_slot\"\n";
        assert!(parse_config_str(raw).is_ok());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let mut cfg = ExperimentConfig::default();
        cfg.learner = LearnerKind::AgentUserV2;
        cfg.epsilon = 0.25;
        cfg.seeds = Some((0..cfg.replications as u64).collect());
        let raw = toml::to_string(&cfg).unwrap();
        let back = parse_config_str(&raw).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn epsilon_out_of_range_is_rejected() {
        assert!(parse_config_str("epsilon = 1.5\n").is_err());
    }

    #[test]
    fn metric_mode_defaults_follow_workload() {
        let cfg = parse_config_str("").unwrap();
        assert_eq!(cfg.metric_mode(), MetricMode::PerSlot);
        let cfg = parse_config_str(
            "learner = \"lru\"\n[workload]\nmode = \"trace\"\ntrace_path = \"x.dat\"\n",
        )
        .unwrap();
        assert_eq!(cfg.metric_mode(), MetricMode::PerRequest);
    }
}
