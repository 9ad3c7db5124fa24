//! End-to-end engine behavior on the shipped games.

use std::sync::Arc;

use potential_nash::engine::{self, Algorithm, NoiseInjection, RunConfig, ThetaInit};
use potential_nash::games::congestion::{make_congestion, CongestionConfig};
use potential_nash::games::cournot::CournotGame;
use potential_nash::games::toy::{make_toy, TOY_NE};
use potential_nash::games::weighted::make_weighted;
use potential_nash::metrics::euclidean_distance;
use potential_nash::model::{Game, StrategyProfile};
use potential_nash::trace::RunTrace;

fn dist_to_toy_ne(trace: &RunTrace) -> f64 {
    euclidean_distance(&trace.meta.final_x, &TOY_NE)
}

#[test]
fn prox_br_converges_on_the_noise_free_toy() {
    let game = make_toy(0.0).unwrap();
    let mut cfg = RunConfig::new(Algorithm::ProxBr, 500);
    cfg.mu = vec![1.0];
    cfg.seed = 1;
    cfg.max_inner_steps = 64; // noise-free inner solves land exactly within a few steps
    cfg.reference = Some(TOY_NE.to_vec());
    let trace = engine::run(&game, &cfg).unwrap();
    assert!(dist_to_toy_ne(&trace) <= 1e-6, "distance {}", dist_to_toy_ne(&trace));
    assert_eq!(trace.meta.audit.violations, 0);
    trace.validate_monotone().unwrap();
}

#[test]
fn prox_br_fixes_the_equilibrium() {
    let game = make_toy(0.0).unwrap();
    let mut cfg = RunConfig::new(Algorithm::ProxBr, 100);
    cfg.x0 = Some(TOY_NE.to_vec());
    cfg.max_inner_steps = 32;
    cfg.snapshots = true;
    cfg.metrics_every = 1;
    let trace = engine::run(&game, &cfg).unwrap();
    for row in &trace.rows {
        let x = row.x.as_ref().unwrap();
        assert!(euclidean_distance(x, &TOY_NE) <= 1e-12);
    }
}

#[test]
fn gradient_response_converges_on_the_toy() {
    let game = make_toy(0.0).unwrap();
    let mut cfg = RunConfig::new(Algorithm::GradResponse, 1000);
    cfg.mu = vec![5.0];
    cfg.seed = 3;
    let trace = engine::run(&game, &cfg).unwrap();
    assert!(dist_to_toy_ne(&trace) <= 1e-6, "distance {}", dist_to_toy_ne(&trace));
    assert_eq!(trace.meta.grad_steps, trace.rows.last().unwrap().grad_steps_cum);
}

#[test]
fn gradient_response_batch_schedule_passthrough() {
    // With a single player the activation order is fixed, so the cumulative
    // gradient count must equal sum_k floor(Gamma_k^3) = sum_{g=1..K} g^3.
    let game = CournotGame::single_market(10.0, 2.0, 5.0, 0.3).unwrap();
    let mut cfg = RunConfig::new(Algorithm::GradResponse, 20);
    cfg.mu = vec![5.0];
    cfg.delta = 0.5;
    let trace = engine::run(&game, &cfg).unwrap();
    let expected: u64 = (1..=20u64).map(|g| g * g * g).sum();
    assert_eq!(trace.meta.grad_steps, expected);
}

#[test]
fn pure_br_exact_inner_reaches_machine_accuracy() {
    let game = make_toy(0.0).unwrap();
    let mut cfg = RunConfig::new(Algorithm::PureBr, 200);
    cfg.exact_inner = true;
    cfg.seed = 5;
    let trace = engine::run(&game, &cfg).unwrap();
    assert!(dist_to_toy_ne(&trace) <= 1e-9, "distance {}", dist_to_toy_ne(&trace));
}

#[test]
fn pure_br_rejects_delays() {
    let game = make_toy(0.0).unwrap();
    let mut cfg = RunConfig::new(Algorithm::PureBr, 10);
    cfg.tau = 2;
    assert!(engine::run(&game, &cfg).is_err());
}

#[test]
fn pure_br_needs_strong_convexity() {
    let game = make_congestion(CongestionConfig::paper_default()).unwrap();
    let cfg = RunConfig::new(Algorithm::PureBr, 10);
    assert!(engine::run(&game, &cfg).is_err());
}

#[test]
fn pure_br_with_summable_injected_noise_still_converges() {
    let game = make_toy(0.0).unwrap();
    let mut cfg = RunConfig::new(Algorithm::PureBr, 200);
    cfg.exact_inner = true;
    cfg.inject_noise = Some(NoiseInjection { scale: 1.0, exponent: 1.5 });
    cfg.seed = 6;
    let trace = engine::run(&game, &cfg).unwrap();
    assert!(dist_to_toy_ne(&trace) <= 1e-3, "distance {}", dist_to_toy_ne(&trace));
    assert_eq!(trace.meta.audit.violations, 0);
}

#[test]
fn potential_descends_under_exact_updates() {
    let game = make_toy(0.0).unwrap();
    let mut cfg = RunConfig::new(Algorithm::ProxBr, 300);
    cfg.exact_inner = true;
    cfg.x0 = Some(vec![0.95, 0.02]);
    cfg.metrics_every = 1;
    cfg.snapshots = true;
    let trace = engine::run(&game, &cfg).unwrap();
    let mut last = f64::INFINITY;
    for row in &trace.rows {
        let x = StrategyProfile::new(game.layout(), row.x.clone().unwrap()).unwrap();
        let p = game.potential(&x).unwrap();
        assert!(p <= last + 1e-12, "potential rose: {p} after {last}");
        last = p;
    }
}

#[test]
fn runs_are_bitwise_deterministic() {
    let game = make_congestion(CongestionConfig::paper_default()).unwrap();
    let mut cfg = RunConfig::new(Algorithm::ProxBr, 60);
    cfg.tau = 4;
    cfg.activation = Some(vec![0.125; 8]);
    cfg.max_inner_steps = 200;
    cfg.seed = 9;
    cfg.snapshots = true;
    let a = engine::run(&game, &cfg).unwrap();
    let b = engine::run(&game, &cfg).unwrap();
    assert_eq!(a.meta.final_x, b.meta.final_x);
    assert_eq!(a.rows.len(), b.rows.len());
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        assert_eq!(ra.k, rb.k);
        assert_eq!(ra.player, rb.player);
        assert_eq!(ra.gap, rb.gap);
        assert_eq!(ra.x, rb.x);
        assert_eq!(ra.grad_steps_cum, rb.grad_steps_cum);
    }
}

#[test]
fn congestion_flows_stabilize_under_the_benchmark_config() {
    let game = make_congestion(CongestionConfig::paper_default()).unwrap();
    let mut cfg = RunConfig::new(Algorithm::ProxBr, 400);
    cfg.mu = vec![1.0];
    cfg.tau = 4;
    cfg.delta = 0.5; // inner schedule Gamma^3
    cfg.activation = Some(vec![0.125; 8]);
    cfg.seed = 11;
    let trace = engine::run(&game, &cfg).unwrap();
    assert_eq!(trace.meta.audit.violations, 0);
    // Every player's committed movement in the final tenth of the horizon is
    // at most 1% of its movement in the first tenth.
    for (i, buckets) in trace.meta.movement.iter().enumerate() {
        let first = buckets[0];
        let last = buckets[9];
        assert!(first > 0.0, "player {i} never moved early");
        assert!(
            last <= 0.01 * first,
            "player {i}: late movement {last} vs early {first}"
        );
    }
    // The benchmark weight mu = 1 sits below the sufficient threshold, which
    // is reported but not fatal.
    assert!(!trace.meta.thresholds.below.is_empty());
}

#[test]
fn learning_beliefs_stay_at_truth_without_pricing_noise() {
    let game = CournotGame::single_market(10.0, 2.0, 5.0, 0.3).unwrap().without_noise();
    let mut cfg = RunConfig::new(Algorithm::ProxBrLearning, 120);
    cfg.mu = vec![5.0];
    cfg.theta_init = ThetaInit::TrueValue;
    cfg.max_inner_steps = 500;
    cfg.seed = 13;
    let trace = engine::run_learning(&game, &cfg).unwrap();
    let final_theta = trace.meta.final_theta.as_ref().unwrap();
    assert!(euclidean_distance(&final_theta[0], &[5.0, 0.3]) <= 1e-12);
    // Belief error column is identically zero.
    for row in &trace.rows {
        assert!(row.theta_err_max.unwrap() <= 1e-12);
    }
}

#[test]
fn scalar_cournot_learns_and_reaches_the_closed_form_equilibrium() {
    use potential_nash::games::cournot::{CournotConfig, CournotGame as CG};
    // Scalar fixture with mild observation noise; the belief noise floor
    // bounds the achievable strategy accuracy.
    let cfg_game = CournotConfig {
        markets: 1,
        firm_markets: vec![vec![0]],
        cap_range: (10.0, 10.0),
        cost_range: (2.0, 2.0),
        a_range: (5.0, 5.0),
        b_range: (0.3, 0.3),
        cost_noise_frac: 1.0 / 32.0,
        price_noise_frac: 1.0 / 32.0,
        sales_range: (0.0, 5.0),
    };
    let game =
        CG::from_parts(&cfg_game, vec![vec![10.0]], vec![vec![2.0]], vec![5.0], vec![0.3]).unwrap();
    let star = ((5.0f64 - 2.0) / (2.0 * 0.3)).clamp(0.0, 10.0);
    let mut cfg = RunConfig::new(Algorithm::ProxBrLearning, 250);
    cfg.mu = vec![5.0];
    cfg.theta_init = ThetaInit::Relative(0.05);
    cfg.seed = 17;
    cfg.reference = Some(vec![star]);
    let trace = engine::run_learning(&game, &cfg).unwrap();
    let d = euclidean_distance(&trace.meta.final_x, &[star]);
    assert!(d <= 1e-3, "distance to closed-form equilibrium: {d}");
}

#[test]
fn async_sg_counters_and_fixed_point() {
    let game = CournotGame::single_market(10.0, 2.0, 5.0, 0.3).unwrap().without_noise();
    let star = 5.0;
    let mut cfg = RunConfig::new(Algorithm::AsyncSg, 300);
    cfg.theta_init = ThetaInit::TrueValue;
    cfg.x0 = Some(vec![star]);
    cfg.seed = 19;
    let trace = engine::run_learning(&game, &cfg).unwrap();
    // One sampled gradient and one rival retrieval per iteration.
    assert_eq!(trace.meta.grad_steps, 300);
    assert_eq!(trace.meta.comm_events, 300);
    // Noise-free stationary start never moves.
    assert!(euclidean_distance(&trace.meta.final_x, &[star]) <= 1e-12);
}

#[test]
fn async_sg_rejects_delays() {
    let game = CournotGame::single_market(10.0, 2.0, 5.0, 0.3).unwrap();
    let mut cfg = RunConfig::new(Algorithm::AsyncSg, 10);
    cfg.tau = 1;
    assert!(engine::run_learning(&game, &cfg).is_err());
}

#[test]
fn infeasible_start_rejected() {
    let game = make_toy(0.0).unwrap();
    let mut cfg = RunConfig::new(Algorithm::ProxBr, 10);
    cfg.x0 = Some(vec![2.0, 0.0]);
    assert!(engine::run(&game, &cfg).is_err());
}

#[test]
fn weighted_wrapper_runs_to_the_same_equilibrium() {
    let base = Arc::new(make_toy(0.0).unwrap());
    let game = make_weighted(base, vec![2.0, 0.5]).unwrap();
    let mut cfg = RunConfig::new(Algorithm::ProxBr, 600);
    cfg.mu = vec![1.0];
    cfg.max_inner_steps = 128;
    cfg.seed = 23;
    let trace = engine::run(&game, &cfg).unwrap();
    assert!(euclidean_distance(&trace.meta.final_x, &TOY_NE) <= 1e-6);
    // Threshold report reflects the weighted variant.
    assert_eq!(trace.meta.thresholds.weighted.len(), 2);
}

#[test]
fn learning_scheme_requires_run_learning() {
    let game = make_toy(0.0).unwrap();
    let cfg = RunConfig::new(Algorithm::ProxBrLearning, 10);
    assert!(engine::run(&game, &cfg).is_err());
}

#[test]
fn gap_column_decreases_on_the_toy() {
    let game = make_toy(0.0).unwrap();
    let mut cfg = RunConfig::new(Algorithm::ProxBr, 300);
    cfg.max_inner_steps = 64;
    cfg.seed = 29;
    let trace = engine::run(&game, &cfg).unwrap();
    let gaps = trace.series(potential_nash::trace::Column::Gap);
    assert!(gaps.first().unwrap().1 > 1e-2);
    assert!(gaps.last().unwrap().1 <= 1e-5);
}
