//! Paired-method comparison: the configured best-response scheme against the
//! single-sample stochastic gradient baseline on one shared game instance.
//! For a grid of accuracies it reports the gradient steps and communication
//! events each method needed before the replication-averaged scaled error
//! `E[|x_k - x*| / (1 + |x*|)]` first drops below the accuracy.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use potential_nash::engine::{self, Algorithm, RunConfig};
use potential_nash::metrics::{euclidean_distance, reference_solve, replication_mean, MeanSeries};
use potential_nash::model::StrategyProfile;
use potential_nash::trace::{Column, RunTrace};
use potential_nash::StreamFactory;

use crate::config::{build_game, ExperimentConfig};
use crate::csvio::fmt_float;

#[derive(Clone, Debug)]
pub struct MethodAtAccuracy {
    pub k: u64,
    pub grad_steps: f64,
    pub comm: f64,
}

#[derive(Clone, Debug)]
pub struct ComparisonRow {
    pub eps: f64,
    pub primary: Option<MethodAtAccuracy>,
    pub baseline: Option<MethodAtAccuracy>,
}

pub struct ComparisonOutcome {
    pub out_dir: PathBuf,
    pub rows: Vec<ComparisonRow>,
    pub reference: Vec<f64>,
    pub reference_residual: f64,
}

pub const DEFAULT_EPS_GRID: [f64; 9] =
    [1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001, 0.0003, 0.0001];

fn scaled_series(
    traces: &[RunTrace],
    ref_norm: f64,
) -> Result<(MeanSeries, MeanSeries, MeanSeries)> {
    let mut dist = replication_mean(traces, Column::DistToRef)?;
    let scale = 1.0 + ref_norm;
    dist.mean.iter_mut().for_each(|v| *v /= scale);
    dist.stderr.iter_mut().for_each(|v| *v /= scale);
    let grad = replication_mean(traces, Column::GradSteps)?;
    let comm = replication_mean(traces, Column::Comm)?;
    Ok((dist, grad, comm))
}

fn first_crossing(
    dist: &MeanSeries,
    grad: &MeanSeries,
    comm: &MeanSeries,
    eps: f64,
) -> Option<MethodAtAccuracy> {
    let idx = dist.mean.iter().position(|m| *m < eps)?;
    Some(MethodAtAccuracy {
        k: dist.ks[idx],
        grad_steps: grad.mean[idx],
        comm: comm.mean[idx],
    })
}

/// Runs the study. The game instance is drawn once and shared; both methods
/// run the same replication seeds.
pub fn run_comparison(cfg: &ExperimentConfig, jobs: usize) -> Result<ComparisonOutcome> {
    cfg.validate()?;
    let compare = cfg
        .compare
        .as_ref()
        .context("comparison requested but the config has no [compare] section")?;
    let algorithm = cfg.algorithm()?;
    if matches!(algorithm, Algorithm::AsyncSg) {
        bail!("algo.kind must be a best-response scheme; the baseline is added automatically");
    }
    if cfg.algo.tau != 0 {
        bail!("the comparison is defined for the delay-free regime (algo.tau = 0)");
    }
    let out_dir = PathBuf::from(&cfg.out.dir);
    fs::create_dir_all(&out_dir)?;

    let master = StreamFactory::from_seed(cfg.run.seed);
    let game = build_game(&cfg.game, &master.child("game", 0))?;

    // Equilibrium reference from a long deterministic projected-gradient run.
    let x0 = StrategyProfile::zeros(game.as_game().layout());
    let (x_ref, residual, ref_iters) =
        reference_solve(game.as_game(), &x0, 1e-11, compare.reference_max_iters)?;
    let reference = x_ref.as_slice().to_vec();
    let ref_norm = reference.iter().map(|v| v * v).sum::<f64>().sqrt();

    let run_method = |is_baseline: bool| -> Result<Vec<RunTrace>> {
        let reps: Vec<u64> = (0..cfg.run.replications).collect();
        reps.par_iter()
            .map(|&r| {
                let seed = StreamFactory::from_seed(cfg.run.seed).derive_seed("replication", r);
                let mut rc: RunConfig = cfg.to_run_config(seed)?;
                rc.reference = Some(reference.clone());
                rc.snapshots = false;
                if is_baseline {
                    rc.algorithm = Algorithm::AsyncSg;
                    rc.horizon = compare.sg_horizon;
                    rc.metrics_every = compare.sg_thinning;
                }
                let trace = match game.as_misspecified() {
                    Some(m) => engine::run_learning(m, &rc)?,
                    None => engine::run(game.as_game(), &rc)?,
                };
                Ok(trace)
            })
            .collect()
    };

    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let (primary_traces, baseline_traces) =
        pool.install(|| -> Result<(Vec<RunTrace>, Vec<RunTrace>)> {
            Ok((run_method(false)?, run_method(true)?))
        })?;
    for t in primary_traces.iter().chain(&baseline_traces) {
        if t.meta.audit.violations > 0 {
            bail!("run audit reported violations during the comparison");
        }
    }

    let (p_dist, p_grad, p_comm) = scaled_series(&primary_traces, ref_norm)?;
    let (b_dist, b_grad, b_comm) = scaled_series(&baseline_traces, ref_norm)?;
    write_error_curve(&out_dir.join("error_primary.csv"), &p_dist, &p_grad, &p_comm)?;
    write_error_curve(&out_dir.join("error_baseline.csv"), &b_dist, &b_grad, &b_comm)?;

    let grid: Vec<f64> =
        compare.eps.clone().unwrap_or_else(|| DEFAULT_EPS_GRID.to_vec());
    let rows: Vec<ComparisonRow> = grid
        .iter()
        .map(|&eps| ComparisonRow {
            eps,
            primary: first_crossing(&p_dist, &p_grad, &p_comm, eps),
            baseline: first_crossing(&b_dist, &b_grad, &b_comm, eps),
        })
        .collect();

    write_comparison_csv(&out_dir.join("comparison.csv"), &rows)?;
    write_reference(&out_dir.join("reference.csv"), &reference, residual, ref_iters)?;
    Ok(ComparisonOutcome { out_dir, rows, reference, reference_residual: residual })
}

fn write_error_curve(
    path: &Path,
    dist: &MeanSeries,
    grad: &MeanSeries,
    comm: &MeanSeries,
) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "k,scaled_err_mean,scaled_err_stderr,grad_steps_mean,comm_mean")?;
    for i in 0..dist.ks.len() {
        writeln!(
            w,
            "{},{},{},{},{}",
            dist.ks[i],
            fmt_float(dist.mean[i]),
            fmt_float(dist.stderr[i]),
            fmt_float(grad.mean[i]),
            fmt_float(comm.mean[i])
        )?;
    }
    Ok(())
}

fn write_comparison_csv(path: &Path, rows: &[ComparisonRow]) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(
        w,
        "eps,primary_k,primary_grad_steps,primary_comm,baseline_k,baseline_grad_steps,baseline_comm,comm_ratio,grad_ratio"
    )?;
    for r in rows {
        let cell = |m: &Option<MethodAtAccuracy>, f: fn(&MethodAtAccuracy) -> String| match m {
            Some(m) => f(m),
            None => "unreached".into(),
        };
        let ratios = match (&r.primary, &r.baseline) {
            (Some(p), Some(b)) => {
                (fmt_float(b.comm / p.comm), fmt_float(p.grad_steps / b.grad_steps))
            }
            _ => ("unreached".into(), "unreached".into()),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            fmt_float(r.eps),
            cell(&r.primary, |m| m.k.to_string()),
            cell(&r.primary, |m| fmt_float(m.grad_steps)),
            cell(&r.primary, |m| fmt_float(m.comm)),
            cell(&r.baseline, |m| m.k.to_string()),
            cell(&r.baseline, |m| fmt_float(m.grad_steps)),
            cell(&r.baseline, |m| fmt_float(m.comm)),
            ratios.0,
            ratios.1
        )?;
    }
    Ok(())
}

fn write_reference(path: &Path, x: &[f64], residual: f64, iters: u64) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "coordinate,value")?;
    for (j, v) in x.iter().enumerate() {
        writeln!(w, "{j},{}", fmt_float(*v))?;
    }
    writeln!(w, "residual,{}", fmt_float(residual))?;
    writeln!(w, "iterations,{iters}")?;
    Ok(())
}

/// `|x*|` helper shared with tests.
pub fn scaled_error(x: &[f64], reference: &[f64]) -> f64 {
    let norm = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    euclidean_distance(x, reference) / (1.0 + norm)
}
