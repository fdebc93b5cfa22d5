//! Command-line runner: single experiments, paired learner comparisons,
//! parameter sweeps, and trace ingestion.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use scsim_core::config::{parse_config, ExperimentConfig};
use scsim_core::demand::{ingest_trace, TraceFormat};
use scsim_core::export::{emit_metrics_csv, RunManifest};
use scsim_core::harness::{replication_topology, run_experiment, MetricsSeries};
use scsim_core::learners::LearnerKind;

#[derive(Parser)]
#[command(
    name = "scsim",
    about = "Small-cell caching simulator: bandit learners, baselines, and oracles over a slotted delay model",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and export its metrics.
    Run(RunArgs),
    /// Run several learners on identical seeds and workloads.
    Compare(CompareArgs),
    /// Sweep one config key over a list of values.
    Sweep(SweepArgs),
    /// Slot a rating trace into per-slot request batches.
    Ingest(IngestArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to a TOML config file; omit for all defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the replication count.
    #[arg(long)]
    replications: Option<usize>,
    /// Override the slot horizon.
    #[arg(long)]
    t_total: Option<usize>,
}

fn parse_learner(s: &str) -> std::result::Result<LearnerKind, String> {
    s.parse::<LearnerKind>().map_err(|e| e.to_string())
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Override the configured learner.
    #[arg(long, value_parser = parse_learner)]
    learner: Option<LearnerKind>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated learner list, e.g. `edge_v2,distributed_v2,lfu`.
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_learner)]
    learners: Vec<LearnerKind>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// `key=v1,v2,...` where key is one of: comm_radius, cache_size,
    /// epsilon, users, sbs, files, t_total.
    #[arg(long)]
    sweep: String,
}

#[derive(Args)]
struct IngestArgs {
    /// Trace file (`user::item::rating::timestamp` or `user_id,file_id,timestamp`).
    #[arg(long)]
    input: PathBuf,
    /// Output CSV of slotted requests.
    #[arg(long, default_value = "slotted.csv")]
    out: PathBuf,
    /// Slot length in seconds.
    #[arg(long, default_value_t = 86_400)]
    slot_length: u64,
    /// Keep only the first N users by ascending raw id.
    #[arg(long)]
    user_cap: Option<usize>,
    /// Input format: auto, movielens, or csv.
    #[arg(long, default_value = "auto")]
    format: String,
}

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => parse_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        cfg.seeds = None;
    }
    if let Some(reps) = common.replications {
        cfg.replications = reps;
        cfg.seeds = None;
    }
    if let Some(t) = common.t_total {
        cfg.t_total = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn export_run(cfg: &ExperimentConfig, series: &MetricsSeries, out: &Path) -> Result<()> {
    let manifest = RunManifest::new(cfg);
    let paths = emit_metrics_csv(series, &manifest, out)?;
    // Positions of the first replication, for plotting.
    let topology = replication_topology(cfg, 0)?;
    fs::write(out.join("sbs_positions.csv"), topology.sbs_positions_csv())?;
    fs::write(out.join("user_positions.csv"), topology.user_positions_csv())?;
    for p in paths {
        println!("wrote {}", p.display());
    }
    println!(
        "wrote {}\nwrote {}",
        out.join("sbs_positions.csv").display(),
        out.join("user_positions.csv").display()
    );
    Ok(())
}

fn summary_line(series: &MetricsSeries) -> String {
    let last = series.aggregate.last();
    let avg_delay = last.map_or(0.0, |r| r.mean_avg_delay);
    let regret = last.and_then(|r| r.mean_regret);
    let init: f64 = series
        .replications
        .iter()
        .map(|r| r.init_slots as f64)
        .sum::<f64>()
        / series.replications.len().max(1) as f64;
    match regret {
        Some(r) => format!(
            "{}: avg_delay {avg_delay:.6e} s, final regret {r:.6e}, mean init slots {init:.1}",
            series.learner
        ),
        None => format!(
            "{}: avg_delay {avg_delay:.6e} s, mean init slots {init:.1}",
            series.learner
        ),
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(learner) = args.learner {
        cfg.learner = learner;
        cfg.validate()?;
    }
    let series = run_experiment(&cfg)?;
    export_run(&cfg, &series, &args.common.out)?;
    println!("{}", summary_line(&series));
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let base = load_config(&args.common)?;
    let mut summary = String::from("learner,final_mean_avg_delay,final_mean_regret\n");
    for learner in &args.learners {
        let mut cfg = base.clone();
        cfg.learner = *learner;
        cfg.validate()
            .with_context(|| format!("learner {learner}"))?;
        let series = run_experiment(&cfg)?;
        let out = args.common.out.join(learner.to_string());
        export_run(&cfg, &series, &out)?;
        println!("{}", summary_line(&series));
        let last = series.aggregate.last();
        let _ = writeln!(
            summary,
            "{},{},{}",
            learner,
            last.map_or(0.0, |r| r.mean_avg_delay),
            last.and_then(|r| r.mean_regret)
                .map(|r| r.to_string())
                .unwrap_or_default()
        );
    }
    let path = args.common.out.join("compare_summary.csv");
    fs::create_dir_all(&args.common.out)?;
    fs::write(&path, summary)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn apply_sweep_value(cfg: &mut ExperimentConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "comm_radius" | "lc" => cfg.topology.comm_radius = value.parse()?,
        "cache_size" | "s" => cfg.cache.size = value.parse()?,
        "epsilon" => cfg.epsilon = value.parse()?,
        "users" => cfg.topology.users = value.parse()?,
        "sbs" => cfg.topology.sbs = value.parse()?,
        "files" => cfg.workload.files = value.parse()?,
        "t_total" => cfg.t_total = value.parse()?,
        other => bail!(
            "unknown sweep key `{other}`; expected one of comm_radius, cache_size, epsilon, users, sbs, files, t_total"
        ),
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let base = load_config(&args.common)?;
    let (key, values) = args
        .sweep
        .split_once('=')
        .context("expected --sweep key=v1,v2,...")?;
    let values: Vec<&str> = values.split(',').filter(|v| !v.is_empty()).collect();
    if values.is_empty() {
        bail!("sweep needs at least one value");
    }
    let mut summary = String::from("value,final_mean_avg_delay,final_mean_regret\n");
    for value in values {
        let mut cfg = base.clone();
        apply_sweep_value(&mut cfg, key, value)?;
        cfg.validate().with_context(|| format!("{key}={value}"))?;
        let series = run_experiment(&cfg)?;
        let out = args.common.out.join(format!("{key}={value}"));
        export_run(&cfg, &series, &out)?;
        println!("{key}={value} {}", summary_line(&series));
        let last = series.aggregate.last();
        let _ = writeln!(
            summary,
            "{},{},{}",
            value,
            last.map_or(0.0, |r| r.mean_avg_delay),
            last.and_then(|r| r.mean_regret)
                .map(|r| r.to_string())
                .unwrap_or_default()
        );
    }
    let path = args.common.out.join("sweep_summary.csv");
    fs::create_dir_all(&args.common.out)?;
    fs::write(&path, summary)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let format = match args.format.as_str() {
        "auto" => TraceFormat::Auto,
        "movielens" => TraceFormat::MovieLens,
        "csv" => TraceFormat::Csv,
        other => bail!("unknown format `{other}`; expected auto, movielens, or csv"),
    };
    let data = ingest_trace(&args.input, args.slot_length, args.user_cap, format)?;
    let mut out = String::from("slot,user_id,file_id\n");
    for batch in &data.batches {
        for (user, files) in batch.requests.iter().enumerate() {
            for &file in files {
                let _ = writeln!(out, "{},{},{}", batch.slot, user, file);
            }
        }
    }
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(&args.out, out)?;
    println!(
        "ingested {} events: {} users, {} files, {} slots -> {}",
        data.num_events,
        data.num_users,
        data.num_files,
        data.num_slots,
        args.out.display()
    );
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Ingest(args) => cmd_ingest(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
