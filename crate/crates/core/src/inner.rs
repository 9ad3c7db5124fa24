//! Inner subroutines: the projected stochastic-approximation solve behind
//! each inexact proximal best response, the batched gradient-response step,
//! and the batched belief update for misspecified games.

use rand::RngCore;

use crate::error::Result;
use crate::model::{Game, MisspecifiedGame, PlayerId, StrategyProfile};
use crate::sets::FeasibleSet;

/// Gradient source for the inner solve: either a plain game oracle or a
/// misspecified oracle evaluated at a fixed belief.
pub enum GradientOracle<'a> {
    Plain(&'a dyn Game),
    AtBelief { game: &'a dyn MisspecifiedGame, theta: &'a [f64] },
}

impl<'a> GradientOracle<'a> {
    pub fn sample_into(
        &self,
        i: PlayerId,
        view: &StrategyProfile,
        out: &mut [f64],
        rng: &mut dyn RngCore,
    ) -> Result<()> {
        match self {
            GradientOracle::Plain(g) => g.sample_gradient_into(i, view, out, rng),
            GradientOracle::AtBelief { game, theta } => {
                game.sample_gradient_at_into(i, view, theta, out, rng)
            }
        }
    }
}

/// Specification of one inner proximal solve.
///
/// `step_curvature` sets the step size `1 / (step_curvature * (t + 1))`; for
/// the proximal solve it equals the proximal weight, while the pure
/// best-response variant passes the player's strong-convexity modulus with a
/// zero `prox_weight`.
pub struct ProxSolveSpec<'a> {
    pub prox_weight: f64,
    pub step_curvature: f64,
    /// Number of projected SA update steps (>= 1).
    pub steps: u64,
    /// Proximal center `x_i(k)`; also the inner starting point.
    pub anchor: &'a [f64],
    pub set: &'a FeasibleSet,
}

/// Projected stochastic approximation for the proximal best-response
/// subproblem. Starting from the anchor, performs `steps` updates
///
/// `z <- Proj[ z - gamma_t (sampled_grad(z, rivals) + prox_weight (z - anchor)) ]`
///
/// with `gamma_t = 1 / (step_curvature (t + 1))`, mutating the caller's view
/// in place (its own block tracks the inner iterate). The result always lies
/// in the supplied feasible set.
pub fn sa_prox_solve(
    oracle: &GradientOracle,
    i: PlayerId,
    view: &mut StrategyProfile,
    spec: &ProxSolveSpec,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    let dim = spec.anchor.len();
    let mut z = spec.anchor.to_vec();
    spec.set.project_into(&mut z)?;
    view.set_block(i, &z);
    let mut g = vec![0.0; dim];
    for t in 1..=spec.steps {
        let gamma = 1.0 / (spec.step_curvature * (t as f64 + 1.0));
        oracle.sample_into(i, view, &mut g, rng)?;
        for d in 0..dim {
            z[d] -= gamma * (g[d] + spec.prox_weight * (z[d] - spec.anchor[d]));
        }
        spec.set.project_into(&mut z)?;
        view.set_block(i, &z);
    }
    Ok(z)
}

/// One projected step with a batch-averaged gradient:
/// `Proj[ x_i - (1/mu) mean_of_batch sampled_grad(x_i, rivals) ]`.
pub fn batch_gradient_step(
    oracle: &GradientOracle,
    i: PlayerId,
    view: &StrategyProfile,
    mu: f64,
    batch: u64,
    set: &FeasibleSet,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    let dim = view.block(i).len();
    let mut mean = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    for _ in 0..batch.max(1) {
        oracle.sample_into(i, view, &mut g, rng)?;
        for d in 0..dim {
            mean[d] += g[d];
        }
    }
    let scale = 1.0 / (mu * batch.max(1) as f64);
    let mut out = view.block(i).to_vec();
    for d in 0..dim {
        out[d] -= scale * mean[d];
    }
    set.project_into(&mut out)?;
    Ok(out)
}

/// One projected belief step with a batch-averaged learning gradient:
/// `Proj_Theta[ theta - beta * mean_of_batch sampled_grad_g(theta) ]`.
pub fn theta_batch_update(
    game: &dyn MisspecifiedGame,
    i: PlayerId,
    belief: &[f64],
    beta: f64,
    batch: u64,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    let dim = belief.len();
    let mut mean = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    for _ in 0..batch.max(1) {
        game.sample_learning_gradient_into(i, belief, &mut g, rng);
        for d in 0..dim {
            mean[d] += g[d];
        }
    }
    let scale = beta / batch.max(1) as f64;
    let mut out = belief.to_vec();
    for d in 0..dim {
        out[d] -= scale * mean[d];
    }
    game.theta_set(i).project_into(&mut out)?;
    Ok(out)
}

/// Residual of the perturbed projection inequality for a strongly convex,
/// smooth objective: with `theta+ = Proj[theta - (grad g(theta) + u)/L_g]`
/// and `c = L_g (theta - theta+)`, checks
///
/// `g(theta+) - g(y) <= c.(theta - y) - |c|^2/(2 L_g) - u.(theta+ - y)
///                      - (mu_g/2) |theta - y|^2`.
///
/// Returns `lhs - rhs`; nonpositive (up to round-off) whenever the supplied
/// constants are valid for `g`.
pub fn lemma_projection_residual(
    g: &dyn Fn(&[f64]) -> f64,
    grad_g: &dyn Fn(&[f64]) -> Vec<f64>,
    set: &FeasibleSet,
    theta: &[f64],
    u: &[f64],
    y: &[f64],
    l_g: f64,
    mu_g: f64,
) -> Result<f64> {
    let grad = grad_g(theta);
    let mut step: Vec<f64> = theta
        .iter()
        .zip(&grad)
        .zip(u)
        .map(|((t, gr), ui)| t - (gr + ui) / l_g)
        .collect();
    set.project_into(&mut step)?;
    let theta_plus = step;
    let c: Vec<f64> = theta.iter().zip(&theta_plus).map(|(t, tp)| l_g * (t - tp)).collect();

    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let sub = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
    let norm2 = |a: &[f64]| -> f64 { dot(a, a) };

    let lhs = g(&theta_plus) - g(y);
    let rhs = dot(&c, &sub(theta, y)) - norm2(&c) / (2.0 * l_g) - dot(u, &sub(&theta_plus, y))
        - mu_g / 2.0 * norm2(&sub(theta, y));
    Ok(lhs - rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::toy::make_toy;
    use crate::model::BlockLayout;
    use crate::rng::StreamFactory;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn toy_view(x1: f64, x2: f64) -> StrategyProfile {
        StrategyProfile::new(BlockLayout::scalar(2).unwrap(), vec![x1, x2]).unwrap()
    }

    #[test]
    fn noise_free_solve_hits_the_prox_point() {
        let game = make_toy(0.0).unwrap();
        let set = game.strategy_set(PlayerId(0));
        let mut view = toy_view(0.0, 0.0);
        let anchor = [0.0];
        let spec = ProxSolveSpec {
            prox_weight: 1.0,
            step_curvature: 1.0,
            steps: 100_000,
            anchor: &anchor,
            set: &set,
        };
        let mut rng = StreamFactory::from_seed(0).stream("oracle", 0);
        let z = sa_prox_solve(&GradientOracle::Plain(&game), PlayerId(0), &mut view, &spec, &mut rng)
            .unwrap();
        assert!((z[0] - 0.4).abs() <= 1e-3, "got {}", z[0]);
    }

    #[test]
    fn single_step_is_one_projected_gradient_move() {
        // With z initialized at the anchor the proximal term vanishes, so one
        // step is exactly Proj[x - grad/(2 mu)].
        let game = make_toy(0.0).unwrap();
        let set = game.strategy_set(PlayerId(0));
        let mu = 2.5;
        let mut view = toy_view(0.3, 0.8);
        let anchor = [0.3];
        let spec =
            ProxSolveSpec { prox_weight: mu, step_curvature: mu, steps: 1, anchor: &anchor, set: &set };
        let mut rng = StreamFactory::from_seed(0).stream("oracle", 0);
        let z = sa_prox_solve(&GradientOracle::Plain(&game), PlayerId(0), &mut view, &spec, &mut rng)
            .unwrap();
        let grad = 2.0 * (0.3 + 0.8 - 1.0) + 2.0 * 0.3;
        let expect = (0.3 - grad / (2.0 * mu)).clamp(0.0, 1.0);
        assert_abs_diff_eq!(z[0], expect, epsilon = 1e-15);
    }

    #[test]
    fn sa_error_bound_at_t_100() {
        // 200-replication mean-squared error against the closed-form target,
        // compared with the coarse bound Q / (t + 1).
        let sigma = 1.0;
        let game = make_toy(sigma).unwrap();
        let set = game.strategy_set(PlayerId(0));
        let mu = 1.0;
        let target = 0.4;
        let q = 2.0 * game.grad_bound().powi(2) / (mu * mu) + 2.0 * set.diameter().unwrap().powi(2);
        let reps = 200;
        let t = 100u64;
        let mut mse = 0.0;
        let factory = StreamFactory::from_seed(77);
        for r in 0..reps {
            let mut rng = factory.child("replication", r).stream("oracle", 0);
            let mut view = toy_view(0.0, 0.0);
            let anchor = [0.0];
            let spec = ProxSolveSpec {
                prox_weight: mu,
                step_curvature: mu,
                // t SA iterates counted as in the error bound: t - 1 updates
                // past the anchor initialization.
                steps: t - 1,
                anchor: &anchor,
                set: &set,
            };
            let z =
                sa_prox_solve(&GradientOracle::Plain(&game), PlayerId(0), &mut view, &spec, &mut rng)
                    .unwrap();
            mse += (z[0] - target) * (z[0] - target);
        }
        mse /= reps as f64;
        assert!(
            mse <= q / (t as f64 + 1.0),
            "mse {mse} exceeds bound {}",
            q / (t as f64 + 1.0)
        );
    }

    #[test]
    fn batch_step_matches_deterministic_gradient() {
        let game = make_toy(0.0).unwrap();
        let set = game.strategy_set(PlayerId(0));
        let view = toy_view(0.0, 0.0);
        let mut rng = StreamFactory::from_seed(0).stream("oracle", 0);
        let one = batch_gradient_step(&GradientOracle::Plain(&game), PlayerId(0), &view, 5.0, 1, &set, &mut rng).unwrap();
        let hundred = batch_gradient_step(&GradientOracle::Plain(&game), PlayerId(0), &view, 5.0, 100, &set, &mut rng).unwrap();
        // Zero-noise oracle: batch size is irrelevant.
        assert_abs_diff_eq!(one[0], hundred[0], epsilon = 1e-15);
        // Hand value: Proj[0 + 2/5] = 0.4.
        assert_abs_diff_eq!(one[0], 0.4, epsilon = 1e-15);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point_of_the_batch_step() {
        let game = make_toy(0.0).unwrap();
        let set = game.strategy_set(PlayerId(0));
        let view = toy_view(1.0 / 3.0, 1.0 / 3.0);
        let mut rng = StreamFactory::from_seed(0).stream("oracle", 0);
        let out = batch_gradient_step(&GradientOracle::Plain(&game), PlayerId(0), &view, 2.0, 4, &set, &mut rng).unwrap();
        assert_abs_diff_eq!(out[0], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn sa_iterates_stay_feasible() {
        let game = make_toy(2.0).unwrap();
        let set = game.strategy_set(PlayerId(0));
        let mut view = toy_view(0.9, 0.1);
        let anchor = [0.9];
        let spec =
            ProxSolveSpec { prox_weight: 1.0, step_curvature: 1.0, steps: 500, anchor: &anchor, set: &set };
        let mut rng = StreamFactory::from_seed(4).stream("oracle", 0);
        let z = sa_prox_solve(&GradientOracle::Plain(&game), PlayerId(0), &mut view, &spec, &mut rng)
            .unwrap();
        assert!(set.contains(&z, 0.0));
    }

    #[test]
    fn projection_lemma_residual_descent_case() {
        // u = 0, y = theta reduces the inequality to plain sufficient descent
        // of a projected gradient step on a quadratic.
        let g = |t: &[f64]| -> f64 { (t[0] - 1.0).powi(2) + 2.0 * (t[1] + 0.5).powi(2) };
        let grad = |t: &[f64]| -> Vec<f64> { vec![2.0 * (t[0] - 1.0), 4.0 * (t[1] + 0.5)] };
        let set = FeasibleSet::NonnegOrthant { dim: 2 };
        let (mu_g, l_g) = (2.0, 4.0);
        let theta = [3.0, 2.0];
        let r = lemma_projection_residual(&g, &grad, &set, &theta, &[0.0, 0.0], &theta, l_g, mu_g)
            .unwrap();
        assert!(r <= 1e-9, "residual {r}");
    }

    #[test]
    fn projection_lemma_residual_random_trials() {
        let g = |t: &[f64]| -> f64 { (t[0] - 1.0).powi(2) + 2.0 * (t[1] + 0.5).powi(2) };
        let grad = |t: &[f64]| -> Vec<f64> { vec![2.0 * (t[0] - 1.0), 4.0 * (t[1] + 0.5)] };
        let set = FeasibleSet::NonnegOrthant { dim: 2 };
        let (mu_g, l_g) = (2.0, 4.0);
        let mut rng = StreamFactory::from_seed(21).stream("trials", 0);
        for _ in 0..1000 {
            let theta = [rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0)];
            let u = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let y = [rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0)];
            let r = lemma_projection_residual(&g, &grad, &set, &theta, &u, &y, l_g, mu_g).unwrap();
            assert!(r <= 1e-9, "residual {r}");
        }
    }

    #[test]
    fn theta_update_variance_scales_inversely_with_batch() {
        use crate::games::cournot::CournotGame;
        let game = CournotGame::single_market(10.0, 2.0, 5.0, 0.3).unwrap();
        let theta = [5.5, 0.25];
        let beta = 0.1;
        let reps = 4000;
        let factory = StreamFactory::from_seed(31);
        let var_at = |batch: u64, label: u64| -> f64 {
            let mut rng = factory.stream("learning", label);
            let mut sum = [0.0f64; 2];
            let mut sumsq = [0.0f64; 2];
            for _ in 0..reps {
                let out =
                    theta_batch_update(&game, PlayerId(0), &theta, beta, batch, &mut rng).unwrap();
                for d in 0..2 {
                    sum[d] += out[d];
                    sumsq[d] += out[d] * out[d];
                }
            }
            (0..2)
                .map(|d| {
                    let m = sum[d] / reps as f64;
                    (sumsq[d] / reps as f64 - m * m).max(0.0)
                })
                .sum()
        };
        let mut prev = var_at(1, 0);
        for (idx, batch) in [4u64, 16, 64].iter().enumerate() {
            let v = var_at(*batch, idx as u64 + 1);
            let ratio = prev / v;
            // Quadrupling the batch should cut the variance ~4x (factor-2 slack).
            assert!((2.0..8.0).contains(&ratio), "batch {batch}: variance ratio {ratio}");
            prev = v;
        }
    }

    #[test]
    fn theta_update_is_stationary_at_the_truth() {
        use crate::games::cournot::CournotGame;
        let game = CournotGame::single_market(10.0, 2.0, 5.0, 0.3).unwrap();
        let truth = [5.0, 0.3];
        let mut rng = StreamFactory::from_seed(33).stream("learning", 0);
        let batch = 10_000u64;
        let out = theta_batch_update(&game, PlayerId(0), &truth, 0.1, batch, &mut rng).unwrap();
        // Sampled-gradient noise at the truth has per-coordinate std below
        // ~2.3 (price noise times regressor moments); the batched step stays
        // within a few standard errors of zero movement.
        let move_norm = ((out[0] - truth[0]).powi(2) + (out[1] - truth[1]).powi(2)).sqrt();
        assert!(move_norm <= 0.1 * 3.0 * 2.3 / (batch as f64).sqrt(), "moved {move_norm}");
    }

    #[test]
    fn interior_step_recovers_the_plain_gradient() {
        // When the projection is inactive, c equals grad g(theta) exactly.
        let grad = |t: &[f64]| -> Vec<f64> { vec![2.0 * (t[0] - 1.0)] };
        let set = FeasibleSet::NonnegOrthant { dim: 1 };
        let l_g = 2.0;
        let theta = [3.0];
        let mut step = vec![theta[0] - grad(&theta)[0] / l_g];
        set.project_into(&mut step).unwrap();
        let c = l_g * (theta[0] - step[0]);
        assert_abs_diff_eq!(c, grad(&theta)[0], epsilon = 1e-12);
    }
}
