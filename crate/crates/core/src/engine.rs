//! End-to-end asynchronous schemes. One iteration activates a single random
//! player, assembles a delayed rival view, runs the configured inner update,
//! and commits exactly one strategy block; everything else stays frozen.

use log::warn;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use crate::error::{CoreError, Result};
use crate::inner::{batch_gradient_step, sa_prox_solve, theta_batch_update, GradientOracle, ProxSolveSpec};
use crate::metrics::{self, GapEvaluator};
use crate::model::{Game, MisspecifiedGame, PlayerId, StrategyProfile};
use crate::rng::StreamFactory;
use crate::schedule::{
    assemble_view, draw_player, inner_step_schedule, ActivationDist, DelayLaw, DelayModel,
    HistoryBuffer, LocalCounters,
};
use crate::sets::FeasibleSet;
use crate::trace::{AuditSummary, RunMeta, RunTrace, ThresholdReport, TraceRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    /// Asynchronous inexact proximal best response.
    ProxBr,
    /// Projected gradient response with growing mini-batches.
    GradResponse,
    /// Pure best response (no proximal term); delay-free, strongly convex
    /// player problems only.
    PureBr,
    /// Proximal best response coupled with belief learning.
    ProxBrLearning,
    /// Single-sample stochastic gradient baseline; delay-free.
    AsyncSg,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::ProxBr => "prox_br",
            Algorithm::GradResponse => "grad_response",
            Algorithm::PureBr => "pure_br",
            Algorithm::ProxBrLearning => "prox_br_learning",
            Algorithm::AsyncSg => "async_sg",
        }
    }

    /// Whether the scheme maintains per-player beliefs. The stochastic
    /// gradient baseline runs either way: with a misspecified game it also
    /// updates beliefs, on a plain game it is ordinary projected SG.
    pub fn needs_learning(&self) -> bool {
        matches!(self, Algorithm::ProxBrLearning)
    }
}

/// Belief step-size rule. The named options are deliberate: a fixed value,
/// the inverse gradient-Lipschitz constant, and the midpoint of the
/// contraction range `(0, 2 mu_g / L_g^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BetaRule {
    Fixed(f64),
    InvLg,
    TheoremRange,
}

/// Initialization of per-player beliefs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThetaInit {
    /// Uniform over the game's declared prior box.
    PriorBox,
    /// Start exactly at the hidden truth (stationarity fixtures).
    TrueValue,
    /// Uniform over `[theta* (1 - f), theta* (1 + f)]`.
    Relative(f64),
}

/// Optional explicit inexactness added after each update, with magnitude
/// `scale * (k + 1)^(-exponent)`; the committed block is re-projected.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseInjection {
    pub scale: f64,
    pub exponent: f64,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub horizon: u64,
    /// Proximal weights; a single entry broadcasts to all players.
    pub mu: Vec<f64>,
    /// Schedule exponent: inner steps and batches grow as
    /// `floor(Gamma^(2 (1 + delta)))`.
    pub delta: f64,
    pub tau: u32,
    pub delay_law: DelayLaw,
    /// Activation probabilities; `None` means uniform.
    pub activation: Option<Vec<f64>>,
    pub beta_rule: BetaRule,
    pub seed: u64,
    /// Logging grid for gap/distance/belief metrics and snapshots.
    pub metrics_every: u64,
    /// Cap on the inner-step schedule; hitting it voids the summability
    /// guarantee behind the inexactness conditions, so it is counted.
    pub max_inner_steps: u64,
    /// Use the game's closed-form proximal map instead of the SA inner solve.
    pub exact_inner: bool,
    pub inject_noise: Option<NoiseInjection>,
    /// Known equilibrium reference for distance logging.
    pub reference: Option<Vec<f64>>,
    pub x0: Option<Vec<f64>>,
    pub theta_init: ThetaInit,
    pub audit: bool,
    pub snapshots: bool,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, horizon: u64) -> RunConfig {
        RunConfig {
            algorithm,
            horizon,
            mu: vec![1.0],
            delta: 0.5,
            tau: 0,
            delay_law: DelayLaw::UniformIid,
            activation: None,
            beta_rule: BetaRule::Fixed(0.1),
            seed: 0,
            metrics_every: 10,
            max_inner_steps: 1_000_000,
            exact_inner: false,
            inject_noise: None,
            reference: None,
            x0: None,
            theta_init: ThetaInit::PriorBox,
            audit: true,
            snapshots: false,
        }
    }

    fn mu_for(&self, n: usize) -> Result<Vec<f64>> {
        let mu = if self.mu.len() == 1 { vec![self.mu[0]; n] } else { self.mu.clone() };
        if mu.len() != n {
            return Err(CoreError::Dimension { context: "mu vector", expected: n, got: mu.len() });
        }
        if mu.iter().any(|m| !(*m > 0.0)) {
            return Err(CoreError::invalid("proximal weights must be positive"));
        }
        Ok(mu)
    }
}

/// Runs a scheme that does not involve belief learning.
pub fn run(game: &dyn Game, cfg: &RunConfig) -> Result<RunTrace> {
    if cfg.algorithm.needs_learning() {
        return Err(CoreError::invalid(format!(
            "{} requires a misspecified game; use run_learning",
            cfg.algorithm.name()
        )));
    }
    run_impl(game, None, cfg)
}

/// Runs any scheme on a misspecified game; non-learning algorithms evaluate
/// at the true parameter.
pub fn run_learning(game: &dyn MisspecifiedGame, cfg: &RunConfig) -> Result<RunTrace> {
    run_impl(game, Some(game), cfg)
}

fn resolve_beta(rule: BetaRule, mis: &dyn MisspecifiedGame) -> f64 {
    let (mu_g, l_g) = mis.learning_constants();
    match rule {
        BetaRule::Fixed(b) => b,
        BetaRule::InvLg => 1.0 / l_g,
        BetaRule::TheoremRange => mu_g / (l_g * l_g),
    }
}

fn default_start(game: &dyn Game) -> Result<StrategyProfile> {
    let layout = game.layout();
    let mut x = StrategyProfile::zeros(layout.clone());
    for i in 0..game.player_count() {
        let i = PlayerId(i);
        let mut block = x.block(i).to_vec();
        game.strategy_set(i).project_into(&mut block)?;
        x.set_block(i, &block);
    }
    Ok(x)
}

fn init_thetas(
    mis: &dyn MisspecifiedGame,
    init: ThetaInit,
    factory: &StreamFactory,
) -> Result<Vec<Vec<f64>>> {
    let n = mis.player_count();
    let mut thetas = Vec::with_capacity(n);
    for i in 0..n {
        let pid = PlayerId(i);
        let truth = mis.theta_true(pid);
        let mut rng = factory.stream("theta-init", i as u64);
        let mut theta = match init {
            ThetaInit::TrueValue => truth,
            ThetaInit::PriorBox => {
                let (lo, hi) = mis.theta_prior_box(pid);
                lo.iter()
                    .zip(&hi)
                    .map(|(l, h)| if h > l { rng.gen_range(*l..*h) } else { *l })
                    .collect()
            }
            ThetaInit::Relative(f) => {
                if !(0.0..1.0).contains(&f) {
                    return Err(CoreError::invalid("relative belief init needs f in [0, 1)"));
                }
                truth
                    .iter()
                    .map(|t| {
                        let (l, h) = (t * (1.0 - f), t * (1.0 + f));
                        if h > l {
                            rng.gen_range(l..h)
                        } else {
                            *t
                        }
                    })
                    .collect()
            }
        };
        mis.theta_set(pid).project_into(&mut theta)?;
        thetas.push(theta);
    }
    Ok(thetas)
}

struct Audit {
    enabled: bool,
    summary: AuditSummary,
    joint: Option<FeasibleSet>,
}

impl Audit {
    fn check(&mut self, ok: bool, what: &str) {
        if !ok {
            self.summary.violations += 1;
            log::error!("run audit violation: {what}");
        }
    }
}

fn run_impl(
    game: &dyn Game,
    mis: Option<&dyn MisspecifiedGame>,
    cfg: &RunConfig,
) -> Result<RunTrace> {
    let n = game.player_count();
    let layout = game.layout();
    if cfg.horizon == 0 {
        return Err(CoreError::invalid("horizon must be at least 1"));
    }
    if cfg.metrics_every == 0 {
        return Err(CoreError::invalid("metrics_every must be at least 1"));
    }
    let mu = cfg.mu_for(n)?;
    if matches!(cfg.algorithm, Algorithm::PureBr | Algorithm::AsyncSg) && cfg.tau != 0 {
        return Err(CoreError::invalid(format!(
            "{} requires the delay-free regime (tau = 0)",
            cfg.algorithm.name()
        )));
    }
    if cfg.algorithm == Algorithm::PureBr {
        for i in 0..n {
            if game.strong_convexity(PlayerId(i)).is_none() {
                return Err(CoreError::invalid(format!(
                    "pure best response needs a declared strong-convexity modulus (player {i})"
                )));
            }
        }
    }
    if cfg.algorithm.needs_learning() && mis.is_none() {
        return Err(CoreError::invalid("learning scheme invoked without a misspecified game"));
    }

    let activation = match &cfg.activation {
        Some(p) => ActivationDist::new(p.clone())?,
        None => ActivationDist::uniform(n)?,
    };
    if activation.len() != n {
        return Err(CoreError::Dimension {
            context: "activation distribution",
            expected: n,
            got: activation.len(),
        });
    }

    let factory = StreamFactory::from_seed(cfg.seed);
    let mut act_rng = factory.stream("activation", 0);
    let mut delay_rng = factory.stream("delays", 0);
    let mut oracle_rngs: Vec<ChaCha8Rng> =
        (0..n).map(|i| factory.stream("oracle", i as u64)).collect();
    let mut learn_rngs: Vec<ChaCha8Rng> =
        (0..n).map(|i| factory.stream("learning", i as u64)).collect();
    let mut inject_rngs: Vec<ChaCha8Rng> =
        (0..n).map(|i| factory.stream("inject", i as u64)).collect();

    let mut x = match &cfg.x0 {
        Some(v) => StrategyProfile::new(layout.clone(), v.clone())?,
        None => default_start(game)?,
    };
    for i in 0..n {
        let pid = PlayerId(i);
        if !game.strategy_set(pid).contains(x.block(pid), 1e-9) {
            return Err(CoreError::invalid(format!("starting block of player {i} is infeasible")));
        }
    }
    let joint = game.joint_set().ok();
    if let Some(j) = &joint {
        if !j.contains(x.as_slice(), 1e-9) {
            return Err(CoreError::invalid("starting profile violates the joint feasible set"));
        }
    }

    let learning_active =
        matches!(cfg.algorithm, Algorithm::ProxBrLearning | Algorithm::AsyncSg) && mis.is_some();
    let mut thetas: Option<Vec<Vec<f64>>> = match (learning_active, mis) {
        (true, Some(m)) => Some(init_thetas(m, cfg.theta_init, &factory)?),
        _ => None,
    };
    let theta_truths: Option<Vec<Vec<f64>>> =
        mis.map(|m| (0..n).map(|i| m.theta_true(PlayerId(i))).collect());
    let beta = mis.map(|m| resolve_beta(cfg.beta_rule, m)).unwrap_or(0.0);
    if learning_active && !(beta > 0.0) {
        return Err(CoreError::invalid("belief step size must be positive"));
    }

    // Step-size sufficiency report (warn-only: benchmark configs run below
    // the sufficient thresholds on purpose).
    let lipschitz: Vec<f64> = (0..n).map(|i| game.lipschitz(PlayerId(i))).collect();
    let weights: Vec<f64> = (0..n).map(|i| game.weight(PlayerId(i))).collect();
    let mut thresholds = ThresholdReport {
        prox_br: metrics::prox_br_threshold(&lipschitz, cfg.tau),
        weighted: metrics::weighted_threshold(&lipschitz, &weights, cfg.tau),
        learning: mis.map(|m| metrics::learning_threshold(m.lipschitz_x(), cfg.tau)),
        below: Vec::new(),
    };
    if matches!(cfg.algorithm, Algorithm::ProxBr | Algorithm::GradResponse | Algorithm::ProxBrLearning) {
        for i in 0..n {
            let bound = if cfg.algorithm == Algorithm::ProxBrLearning {
                thresholds.learning.unwrap_or(0.0)
            } else {
                thresholds.weighted[i]
            };
            if mu[i] <= bound {
                thresholds.below.push(i);
            }
        }
        if !thresholds.below.is_empty() {
            warn!(
                "proximal weights below the sufficient threshold for players {:?} (continuing)",
                thresholds.below
            );
        }
    }

    let gap_ev = GapEvaluator::for_game(game).ok();

    let delay_model = DelayModel { tau: cfg.tau, law: cfg.delay_law };
    let mut buf = HistoryBuffer::new(cfg.tau);
    buf.push(0, x.clone());
    let mut counters = LocalCounters::new(n, cfg.delta)?;

    let mut audit = Audit {
        enabled: cfg.audit,
        summary: AuditSummary { enabled: cfg.audit, ..AuditSummary::default() },
        joint: joint.clone(),
    };

    let mut grad_steps: u64 = 0;
    let mut comm: u64 = 0;
    let mut caps_hit: u64 = 0;
    let mut movement: Vec<[f64; 10]> = vec![[0.0; 10]; n];
    let mut rows: Vec<TraceRow> = Vec::new();

    let log_state = |k: u64,
                     player: Option<usize>,
                     delays: Option<Vec<u32>>,
                     x: &StrategyProfile,
                     thetas: &Option<Vec<Vec<f64>>>,
                     grad_steps: u64,
                     comm: u64,
                     gap_ev: &Option<GapEvaluator>|
     -> Result<TraceRow> {
        let gap = match gap_ev {
            Some(ev) => Some(ev.value(x)?),
            None => None,
        };
        let dist_to_ref =
            cfg.reference.as_ref().map(|r| metrics::euclidean_distance(x.as_slice(), r));
        let theta_err_max = match (thetas, &theta_truths) {
            (Some(b), Some(t)) => Some(metrics::theta_error(b, t)?.max),
            _ => None,
        };
        Ok(TraceRow {
            k,
            player,
            delays,
            gap,
            dist_to_ref,
            theta_err_max,
            grad_steps_cum: grad_steps,
            comm_cum: comm,
            x: if cfg.snapshots { Some(x.as_slice().to_vec()) } else { None },
        })
    };

    rows.push(log_state(0, None, None, &x, &thetas, 0, 0, &gap_ev)?);

    for k in 0..cfg.horizon {
        let i = draw_player(&activation, &mut act_rng);
        let view = assemble_view(&buf, &delay_model, i, k, &mut delay_rng);
        if audit.enabled {
            let bounded = view.delays.iter().all(|d| *d <= cfg.tau);
            audit.check(bounded, "sampled delay exceeded tau");
            audit.summary.max_delay_seen =
                audit.summary.max_delay_seen.max(view.delays.iter().copied().max().unwrap_or(0));
        }

        // Effective set from the current profile, not the delayed view.
        let set = game.effective_set(i, &x)?;
        let anchor = x.block(i).to_vec();
        let schedule = inner_step_schedule(&counters, i, cfg.max_inner_steps);
        if schedule == cfg.max_inner_steps {
            caps_hit += 1;
        }
        comm += 1;

        let mut new_block = match cfg.algorithm {
            Algorithm::ProxBr | Algorithm::ProxBrLearning => {
                if cfg.exact_inner {
                    game.closed_form_prox(i, &view.profile, mu[i.0], &anchor).ok_or_else(|| {
                        CoreError::invalid("exact_inner requested but the game has no closed-form proximal map")
                    })?
                } else {
                    let oracle = match (cfg.algorithm, mis, &thetas) {
                        (Algorithm::ProxBrLearning, Some(m), Some(t)) => {
                            GradientOracle::AtBelief { game: m, theta: &t[i.0] }
                        }
                        _ => GradientOracle::Plain(game),
                    };
                    let spec = ProxSolveSpec {
                        prox_weight: mu[i.0],
                        step_curvature: mu[i.0],
                        steps: schedule,
                        anchor: &anchor,
                        set: &set,
                    };
                    let mut scratch = view.profile.clone();
                    grad_steps += schedule;
                    sa_prox_solve(&oracle, i, &mut scratch, &spec, &mut oracle_rngs[i.0])?
                }
            }
            Algorithm::GradResponse => {
                grad_steps += schedule;
                batch_gradient_step(
                    &GradientOracle::Plain(game),
                    i,
                    &view.profile,
                    mu[i.0],
                    schedule,
                    &set,
                    &mut oracle_rngs[i.0],
                )?
            }
            Algorithm::PureBr => {
                if cfg.exact_inner {
                    game.closed_form_prox(i, &view.profile, 0.0, &anchor).ok_or_else(|| {
                        CoreError::invalid("exact_inner requested but the game has no closed-form best response")
                    })?
                } else {
                    let modulus = game.strong_convexity(i).expect("validated above");
                    let spec = ProxSolveSpec {
                        prox_weight: 0.0,
                        step_curvature: modulus,
                        steps: schedule,
                        anchor: &anchor,
                        set: &set,
                    };
                    let mut scratch = view.profile.clone();
                    grad_steps += schedule;
                    sa_prox_solve(
                        &GradientOracle::Plain(game),
                        i,
                        &mut scratch,
                        &spec,
                        &mut oracle_rngs[i.0],
                    )?
                }
            }
            Algorithm::AsyncSg => {
                let gamma = (counters.gamma(i) as f64).powf(-0.6);
                let mut g = vec![0.0; anchor.len()];
                match (mis, &thetas) {
                    (Some(m), Some(t)) => {
                        m.sample_gradient_at_into(i, &x, &t[i.0], &mut g, &mut oracle_rngs[i.0])?
                    }
                    _ => game.sample_gradient_into(i, &x, &mut g, &mut oracle_rngs[i.0])?,
                }
                grad_steps += 1;
                let mut nb = anchor.clone();
                for d in 0..nb.len() {
                    nb[d] -= gamma * g[d];
                }
                set.project_into(&mut nb)?;
                nb
            }
        };

        // Belief refresh of the activated player.
        if let (Some(m), Some(t)) = (mis, thetas.as_mut()) {
            match cfg.algorithm {
                Algorithm::ProxBrLearning => {
                    t[i.0] =
                        theta_batch_update(m, i, &t[i.0], beta, schedule, &mut learn_rngs[i.0])?;
                }
                Algorithm::AsyncSg => {
                    let gamma = (counters.gamma(i) as f64).powf(-0.6);
                    t[i.0] =
                        theta_batch_update(m, i, &t[i.0], beta * gamma, 1, &mut learn_rngs[i.0])?;
                }
                _ => {}
            }
        }

        if let Some(inj) = &cfg.inject_noise {
            let mag = inj.scale * ((k + 1) as f64).powf(-inj.exponent);
            let rng = &mut inject_rngs[i.0];
            let mut dir: Vec<f64> = (0..new_block.len())
                .map(|_| rand_distr::StandardNormal.sample(rng))
                .collect();
            let norm = dir.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
            if norm > 1e-300 {
                for (b, d) in new_block.iter_mut().zip(&dir) {
                    *b += mag * d / norm;
                }
            } else {
                dir.clear();
            }
            set.project_into(&mut new_block)?;
        }

        if audit.enabled {
            audit.check(new_block.iter().all(|v| v.is_finite()), "non-finite committed block");
            audit.check(set.contains(&new_block, 1e-12), "committed block left its feasible set");
        }

        let moved = metrics::euclidean_distance(&new_block, &anchor);
        let bucket = ((k * 10) / cfg.horizon).min(9) as usize;
        movement[i.0][bucket] += moved;

        let prev = x.clone();
        x.set_block(i, &new_block);
        counters.bump(i);
        buf.push(k + 1, x.clone());

        if audit.enabled {
            audit.summary.iterations += 1;
            // Exactly one block may differ between consecutive iterates.
            let single = (0..n).all(|j| {
                let j = PlayerId(j);
                j == i || x.block(j) == prev.block(j)
            });
            audit.check(single, "more than one block changed in an iteration");
            audit.check(
                counters.total_activations() == k + 1,
                "activation counters inconsistent with the iteration index",
            );
            if let Some(joint) = &audit.joint {
                audit.check(joint.contains(x.as_slice(), 1e-9), "profile left the joint set");
            }
        }

        let now = k + 1;
        if now % cfg.metrics_every == 0 || now == cfg.horizon {
            rows.push(log_state(
                now,
                Some(i.0),
                Some(view.delays.clone()),
                &x,
                &thetas,
                grad_steps,
                comm,
                &gap_ev,
            )?);
        }
    }

    let meta = RunMeta {
        algorithm: cfg.algorithm.name().to_string(),
        seed: cfg.seed,
        players: n,
        horizon: cfg.horizon,
        mu,
        tau: cfg.tau,
        thresholds,
        audit: audit.summary,
        movement,
        grad_steps,
        comm_events: comm,
        schedule_caps_hit: caps_hit,
        final_x: x.as_slice().to_vec(),
        final_theta: thetas,
    };
    Ok(RunTrace { meta, rows })
}
