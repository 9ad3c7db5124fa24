//! Stationarity gap, distances to references, belief error, step-size
//! thresholds, and cross-replication averaging.

use crate::error::{CoreError, Result};
use crate::model::{Game, PlayerId, StrategyProfile};
use crate::sets::FeasibleSet;
use crate::trace::{Column, RunTrace};

/// Evaluates the primal stationarity gap
/// `G(x) = sup_{y in X} grad P(x) . (x - y)`,
/// nonnegative everywhere and zero exactly at equilibria.
pub struct GapEvaluator<'a> {
    set: FeasibleSet,
    grad: GradField<'a>,
}

enum GradField<'a> {
    /// Potential gradient assembled per player as `w_i grad_i f_i`.
    Game(&'a dyn Game),
    Custom(Box<dyn Fn(&StrategyProfile, &mut [f64]) -> Result<()> + Send + Sync + 'a>),
}

impl<'a> GapEvaluator<'a> {
    pub fn new(
        set: FeasibleSet,
        grad: Box<dyn Fn(&StrategyProfile, &mut [f64]) -> Result<()> + Send + Sync + 'a>,
    ) -> GapEvaluator<'a> {
        GapEvaluator { set, grad: GradField::Custom(grad) }
    }

    /// Assembles `grad P` from the game's per-player deterministic gradients.
    /// The sup runs over the game's joint set: the product box for separable
    /// games, the shared polytope for coupled ones. Deterministic gradients
    /// are required; Monte-Carlo estimates would fold oracle noise into the
    /// optimality measure.
    pub fn for_game(game: &'a dyn Game) -> Result<GapEvaluator<'a>> {
        if !game.has_exact_gradient() {
            return Err(CoreError::Unsupported {
                what: "gap evaluation needs a deterministic gradient",
            });
        }
        let set = game.joint_set()?;
        Ok(GapEvaluator { set, grad: GradField::Game(game) })
    }

    fn field(&self, x: &StrategyProfile, out: &mut [f64]) -> Result<()> {
        match &self.grad {
            GradField::Custom(f) => f(x, out),
            GradField::Game(game) => {
                let layout = game.layout();
                for i in 0..game.player_count() {
                    let i = PlayerId(i);
                    let r = layout.range(i);
                    game.exact_gradient_into(i, x, &mut out[r.clone()])?;
                    let w = game.weight(i);
                    if w != 1.0 {
                        out[r].iter_mut().for_each(|v| *v *= w);
                    }
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, x: &StrategyProfile) -> Result<f64> {
        gap_value(self, x)
    }
}

/// `G(x) = grad P(x) . x - min_{y in X} grad P(x) . y`, clipped to zero for
/// round-off above `-1e-9`; anything more negative indicates an infeasible
/// `x` and aborts.
pub fn gap_value(ev: &GapEvaluator, x: &StrategyProfile) -> Result<f64> {
    let mut g = vec![0.0; x.dim()];
    ev.field(x, &mut g)?;
    let (_, min_val) = ev.set.linear_minimize(&g)?;
    let at_x: f64 = g.iter().zip(x.as_slice()).map(|(gi, xi)| gi * xi).sum();
    let gap = at_x - min_val;
    if gap < -1e-9 {
        return Err(CoreError::invalid(format!(
            "gap {gap} significantly negative; point is infeasible"
        )));
    }
    Ok(gap.max(0.0))
}

/// Belief-error report across players.
#[derive(Clone, Debug)]
pub struct ThetaError {
    pub per_player: Vec<f64>,
    pub max: f64,
    pub mean: f64,
    /// `|theta_i - theta*| / (1 + |theta*|)` per player.
    pub scaled: Vec<f64>,
}

pub fn theta_error(beliefs: &[Vec<f64>], truths: &[Vec<f64>]) -> Result<ThetaError> {
    if beliefs.len() != truths.len() {
        return Err(CoreError::Dimension {
            context: "theta error",
            expected: truths.len(),
            got: beliefs.len(),
        });
    }
    let mut per_player = Vec::with_capacity(beliefs.len());
    let mut scaled = Vec::with_capacity(beliefs.len());
    for (b, t) in beliefs.iter().zip(truths) {
        if b.len() != t.len() {
            return Err(CoreError::Dimension {
                context: "theta error block",
                expected: t.len(),
                got: b.len(),
            });
        }
        let err = b.iter().zip(t).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let tnorm = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        per_player.push(err);
        scaled.push(err / (1.0 + tnorm));
    }
    let max = per_player.iter().copied().fold(0.0, f64::max);
    let mean = per_player.iter().sum::<f64>() / per_player.len().max(1) as f64;
    Ok(ThetaError { per_player, max, mean, scaled })
}

/// Pointwise mean and standard error of a metric column across replications
/// sharing a logging grid.
#[derive(Clone, Debug)]
pub struct MeanSeries {
    pub ks: Vec<u64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

pub fn replication_mean(traces: &[RunTrace], column: Column) -> Result<MeanSeries> {
    if traces.is_empty() {
        return Err(CoreError::invalid("no traces to average"));
    }
    let grids: Vec<Vec<(u64, f64)>> = traces.iter().map(|t| t.series(column)).collect();
    let ks: Vec<u64> = grids[0].iter().map(|(k, _)| *k).collect();
    for g in &grids[1..] {
        if g.len() != ks.len() || g.iter().zip(&ks).any(|((k, _), k0)| k != k0) {
            return Err(CoreError::GridMismatch);
        }
    }
    let r = traces.len() as f64;
    let mut mean = Vec::with_capacity(ks.len());
    let mut stderr = Vec::with_capacity(ks.len());
    for t in 0..ks.len() {
        let m: f64 = grids.iter().map(|g| g[t].1).sum::<f64>() / r;
        let var: f64 = grids.iter().map(|g| (g[t].1 - m) * (g[t].1 - m)).sum::<f64>()
            / (r - 1.0).max(1.0);
        mean.push(m);
        stderr.push((var / r).sqrt());
    }
    Ok(MeanSeries { ks, mean, stderr })
}

/// Sufficient proximal weight for the delayed asynchronous scheme:
/// `L_i/2 + (sqrt(2) tau L_i / 2)(L_i/L_avg + L_avg/L_i)`.
pub fn prox_br_threshold(lipschitz: &[f64], tau: u32) -> Vec<f64> {
    let l_avg = lipschitz.iter().sum::<f64>() / lipschitz.len() as f64;
    lipschitz
        .iter()
        .map(|&l| l / 2.0 + (2.0f64.sqrt() * tau as f64 * l / 2.0) * (l / l_avg + l_avg / l))
        .collect()
}

/// Weighted-game variant of [`prox_br_threshold`].
pub fn weighted_threshold(lipschitz: &[f64], weights: &[f64], tau: u32) -> Vec<f64> {
    let l_avg = lipschitz.iter().sum::<f64>() / lipschitz.len() as f64;
    let w_avg = weights.iter().sum::<f64>() / weights.len() as f64;
    lipschitz
        .iter()
        .zip(weights)
        .map(|(&l, &w)| {
            l / 2.0
                + (2.0f64.sqrt() * tau as f64 * l / 2.0)
                    * ((l_avg / l) * (w_avg / w) + (l / l_avg) * (w / w_avg))
        })
        .collect()
}

/// Sufficient uniform proximal weight for the learning scheme:
/// `L_x/2 + sqrt(3) L_x tau`.
pub fn learning_threshold(l_x: f64, tau: u32) -> f64 {
    l_x / 2.0 + 3.0f64.sqrt() * l_x * tau as f64
}

/// Deterministic projected-gradient reference solve on the potential:
/// `x <- Proj_X[x - eta grad P(x)]` until the step norm falls below `tol`.
/// Only separable (box/interval) sets are supported; returns the point and
/// the last step norm. Used to estimate equilibrium references for
/// comparison studies.
pub fn reference_solve(
    game: &dyn Game,
    x0: &StrategyProfile,
    tol: f64,
    max_iters: u64,
) -> Result<(StrategyProfile, f64, u64)> {
    let layout = game.layout();
    let n = game.player_count();
    let lip: f64 = (0..n).map(|i| game.lipschitz(PlayerId(i))).fold(0.0, f64::max);
    let eta = 1.0 / (lip.max(1e-12) * (n as f64).sqrt());
    let sets: Vec<FeasibleSet> = (0..n).map(|i| game.strategy_set(PlayerId(i))).collect();
    let mut x = x0.clone();
    let mut step_norm = f64::INFINITY;
    let mut iters = 0;
    let mut g = vec![0.0; x.dim()];
    while iters < max_iters {
        iters += 1;
        for i in 0..n {
            let i = PlayerId(i);
            let r = layout.range(i);
            game.exact_gradient_into(i, &x, &mut g[r])?;
        }
        let mut step2 = 0.0;
        for i in 0..n {
            let i = PlayerId(i);
            let r = layout.range(i);
            let w = game.weight(i);
            let mut block = x.block(i).to_vec();
            for (bd, gd) in block.iter_mut().zip(g[r.clone()].iter()) {
                *bd -= eta * w * gd;
            }
            sets[i.0].project_into(&mut block)?;
            for (new, old) in block.iter().zip(x.block(i)) {
                step2 += (new - old) * (new - old);
            }
            x.set_block(i, &block);
        }
        step_norm = step2.sqrt();
        if step_norm <= tol {
            break;
        }
    }
    Ok((x, step_norm, iters))
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
