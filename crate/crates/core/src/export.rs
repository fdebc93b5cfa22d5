//! Metrics and manifest export. All numbers are written with Rust's shortest
//! round-trip float formatting, so re-reading a CSV loses nothing and
//! identical runs emit byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::harness::MetricsSeries;

/// Everything needed to reproduce a run bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Artifact name and version that produced the run.
    pub artifact: String,
    pub learner: String,
    /// Resolved per-replication seeds.
    pub seeds: Vec<u64>,
    /// Files the run wrote, relative to the output directory.
    pub outputs: Vec<String>,
    /// Fully resolved configuration echo.
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig) -> Self {
        RunManifest {
            artifact: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            learner: config.learner.to_string(),
            seeds: crate::harness::seed_list(config),
            outputs: vec![
                "per_slot.csv".into(),
                "aggregate.csv".into(),
                "manifest.toml".into(),
            ],
            config: config.clone(),
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-slot CSV: one row per (replication, slot).
pub fn per_slot_csv(series: &MetricsSeries) -> String {
    let mut out = String::from("slot,replication,delay,reward,requests,avg_delay,regret,regret_sampled\n");
    for rep in &series.replications {
        for s in &rep.slots {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.slot,
                rep.replication,
                s.delay,
                s.reward,
                s.requests,
                s.avg_delay,
                fmt_opt(s.regret),
                fmt_opt(s.regret_sampled),
            );
        }
    }
    out
}

/// Aggregate CSV: pointwise mean and standard deviation across replications.
pub fn aggregate_csv(series: &MetricsSeries) -> String {
    let mut out = String::from(
        "slot,mean_delay,std_delay,mean_reward,std_reward,mean_requests,std_requests,mean_avg_delay,std_avg_delay,mean_regret,std_regret\n",
    );
    for row in &series.aggregate {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            row.slot,
            row.mean_delay,
            row.std_delay,
            row.mean_reward,
            row.std_reward,
            row.mean_requests,
            row.std_requests,
            row.mean_avg_delay,
            row.std_avg_delay,
            fmt_opt(row.mean_regret),
            fmt_opt(row.std_regret),
        );
    }
    out
}

pub fn manifest_toml(manifest: &RunManifest) -> Result<String> {
    toml::to_string(manifest).map_err(|e| Error::ConfigParse(e.to_string()))
}

/// Writes `per_slot.csv`, `aggregate.csv`, and `manifest.toml` into
/// `out_dir`, creating it if needed. Returns the written paths.
pub fn emit_metrics_csv(
    series: &MetricsSeries,
    manifest: &RunManifest,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)
        .map_err(|e| Error::io(format!("create {}", out_dir.display()), e))?;
    let files = [
        ("per_slot.csv", per_slot_csv(series)),
        ("aggregate.csv", aggregate_csv(series)),
        ("manifest.toml", manifest_toml(manifest)?),
    ];
    let mut written = Vec::new();
    for (name, content) in files {
        let path = out_dir.join(name);
        fs::write(&path, content).map_err(|e| Error::io(format!("write {}", path.display()), e))?;
        written.push(path);
    }
    Ok(written)
}
