//! Replicated experiment execution: builds the game per replication, runs
//! the engine, and writes trace/mean/summary files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use rayon::prelude::*;

use potential_nash::engine;
use potential_nash::metrics::replication_mean;
use potential_nash::trace::{Column, RunTrace};
use potential_nash::StreamFactory;

use crate::config::{build_game, ExperimentConfig, GameInstance};
use crate::csvio::{self, SummaryRow};

pub struct ExperimentOutcome {
    pub out_dir: PathBuf,
    pub traces: Vec<RunTrace>,
}

/// Seed of replication `r` under the master seed: an independent substream
/// of the master, so replication sets can grow without disturbing old runs.
pub fn replication_seed(master: u64, r: u64) -> u64 {
    StreamFactory::from_seed(master).derive_seed("replication", r)
}

fn run_one(cfg: &ExperimentConfig, master: &StreamFactory, r: u64) -> Result<(RunTrace, GameInstance)> {
    // Randomly parameterized games redraw per replication unless pinned.
    let game_index = if cfg.game.redraw_per_replication { r } else { 0 };
    let game = build_game(&cfg.game, &master.child("game", game_index))?;
    let seed = StreamFactory::from_seed(cfg.run.seed).derive_seed("replication", r);
    let rc = cfg.to_run_config(seed)?;
    let trace = match game.as_misspecified() {
        Some(m) => engine::run_learning(m, &rc)?,
        None => engine::run(game.as_game(), &rc)?,
    };
    Ok((trace, game))
}

/// Executes all replications (in parallel across `jobs` workers), writes one
/// trace CSV per replication plus replication-mean and summary files, and
/// returns the traces.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let out_dir = PathBuf::from(&cfg.out.dir);
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    let master = StreamFactory::from_seed(cfg.run.seed);

    let reps: Vec<u64> = (0..cfg.run.replications).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("cannot build worker pool")?;
    let results: Result<Vec<(RunTrace, GameInstance)>> =
        pool.install(|| reps.par_iter().map(|&r| run_one(cfg, &master, r)).collect());
    let results = results?;

    let mut traces = Vec::with_capacity(results.len());
    let mut summary = Vec::with_capacity(results.len());
    for (r, (trace, game)) in results.into_iter().enumerate() {
        let dims = game.as_game().layout().total_dim();
        let path = out_dir.join(format!("trace_r{r:03}.csv"));
        csvio::write_trace_csv(&path, &trace, dims)?;
        let last = trace.rows.last().expect("non-empty trace");
        summary.push(SummaryRow {
            replication: r as u64,
            seed: trace.meta.seed,
            final_k: last.k,
            final_gap: last.gap,
            final_dist: last.dist_to_ref,
            final_theta_err: last.theta_err_max,
            grad_steps: trace.meta.grad_steps,
            comm: trace.meta.comm_events,
            audit_violations: trace.meta.audit.violations,
        });
        traces.push(trace);
    }

    csvio::write_summary_csv(&out_dir.join("summary.csv"), &summary)?;
    for (name, column) in [
        ("gap", Column::Gap),
        ("dist_to_ref", Column::DistToRef),
        ("theta_err_max", Column::ThetaErrMax),
        ("grad_steps", Column::GradSteps),
        ("comm", Column::Comm),
    ] {
        // Columns absent from the run (no reference, no learning) yield empty
        // series; skip those files.
        if traces[0].series(column).is_empty() {
            continue;
        }
        let series = replication_mean(&traces, column)?;
        csvio::write_mean_csv(&out_dir.join(format!("mean_{name}.csv")), name, &series)?;
    }
    write_meta(&out_dir.join("meta.txt"), cfg, &traces)?;

    if traces.iter().any(|t| t.meta.audit.violations > 0) {
        bail!("run audit reported violations; see meta.txt");
    }
    info!("wrote {} replication(s) to {}", traces.len(), out_dir.display());
    Ok(ExperimentOutcome { out_dir, traces })
}

fn write_meta(path: &Path, cfg: &ExperimentConfig, traces: &[RunTrace]) -> Result<()> {
    use std::fmt::Write as _;
    let mut s = String::new();
    let meta = &traces[0].meta;
    writeln!(s, "algorithm: {}", meta.algorithm)?;
    writeln!(s, "game: {}", cfg.game.kind)?;
    writeln!(s, "players: {}", meta.players)?;
    writeln!(s, "horizon: {}", meta.horizon)?;
    writeln!(s, "tau: {}", meta.tau)?;
    writeln!(s, "replications: {}", traces.len())?;
    writeln!(s, "master_seed: {}", cfg.run.seed)?;
    writeln!(s, "mu: {:?}", meta.mu)?;
    writeln!(s, "sufficient_mu_delayed: {:?}", meta.thresholds.weighted)?;
    if let Some(l) = meta.thresholds.learning {
        writeln!(s, "sufficient_mu_learning: {l}")?;
    }
    writeln!(s, "players_below_threshold: {:?}", meta.thresholds.below)?;
    let caps: u64 = traces.iter().map(|t| t.meta.schedule_caps_hit).sum();
    writeln!(s, "inner_schedule_caps_hit: {caps}")?;
    let violations: u64 = traces.iter().map(|t| t.meta.audit.violations).sum();
    writeln!(s, "audit_violations: {violations}")?;
    fs::write(path, s)?;
    Ok(())
}
