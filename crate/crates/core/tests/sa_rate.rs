//! Convergence-rate check of the inner SA solver on the toy game: the
//! replication-averaged squared error against the closed-form proximal point
//! must decay like 1/t and stay below the coarse bound Q / (t + 1).

use potential_nash::games::toy::make_toy;
use potential_nash::inner::{sa_prox_solve, GradientOracle, ProxSolveSpec};
use potential_nash::model::{Game, PlayerId, StrategyProfile};
use potential_nash::rng::StreamFactory;
use rayon::prelude::*;

/// Mean squared error of the inner iterate at the given SA indices (index 1
/// is the starting anchor), estimated over independent replications.
fn mse_curve(sigma: f64, mu: f64, reps: u64, ts: &[u64], seed: u64) -> Vec<f64> {
    let game = make_toy(sigma).unwrap();
    let set = game.strategy_set(PlayerId(0));
    let target = 0.4; // closed-form proximal point at the origin for mu = 1
    let factory = StreamFactory::from_seed(seed);
    let per_rep: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let rep = factory.child("replication", r);
            ts.iter()
                .map(|&t| {
                    let mut rng = rep.stream("oracle", t);
                    let mut view =
                        StrategyProfile::new(game.layout(), vec![0.0, 0.0]).unwrap();
                    let anchor = [0.0];
                    let spec = ProxSolveSpec {
                        prox_weight: mu,
                        step_curvature: mu,
                        steps: t - 1,
                        anchor: &anchor,
                        set: &set,
                    };
                    let z = sa_prox_solve(
                        &GradientOracle::Plain(&game),
                        PlayerId(0),
                        &mut view,
                        &spec,
                        &mut rng,
                    )
                    .unwrap();
                    (z[0] - target) * (z[0] - target)
                })
                .collect()
        })
        .collect();
    (0..ts.len())
        .map(|j| per_rep.iter().map(|row| row[j]).sum::<f64>() / reps as f64)
        .collect()
}

fn log_log_slope(ts: &[u64], mse: &[f64]) -> f64 {
    let xs: Vec<f64> = ts.iter().map(|t| (*t as f64).ln()).collect();
    let ys: Vec<f64> = mse.iter().map(|m| m.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

#[test]
fn sa_error_decays_at_the_one_over_t_rate() {
    let sigma = 1.0;
    let mu = 1.0;
    let game = make_toy(sigma).unwrap();
    let q = 2.0 * game.grad_bound().powi(2) / (mu * mu)
        + 2.0 * game.strategy_set(PlayerId(0)).diameter().unwrap().powi(2);

    // Log-spaced checkpoints spanning t in [10, 10^4].
    let ts: Vec<u64> = (0..25)
        .map(|j| (10.0f64 * (1000.0f64).powf(j as f64 / 24.0)).round() as u64)
        .collect();
    let mse = mse_curve(sigma, mu, 200, &ts, 424242);

    for (t, m) in ts.iter().zip(&mse) {
        let bound = q / (*t as f64 + 1.0);
        assert!(m <= &bound, "MSE {m} at t = {t} exceeds the bound {bound}");
    }

    let slope = log_log_slope(&ts, &mse);
    assert!(
        (-1.15..=-0.9).contains(&slope),
        "log-log slope {slope} outside [-1.15, -0.9]"
    );
}
