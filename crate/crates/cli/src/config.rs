//! Experiment configuration: a flat TOML file with dotted keys. The
//! normative names are `game.kind`, `algo.kind`, `algo.mu`, `algo.delta`,
//! `algo.tau`, `algo.beta_rule`, `run.horizon`, `run.seed`,
//! `run.replications`, `run.thinning`, and `out.dir`; everything else has
//! defaults.

use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use potential_nash::engine::{Algorithm, BetaRule, NoiseInjection, RunConfig, ThetaInit};
use potential_nash::games::congestion::{make_congestion, CongestionConfig, CongestionGame};
use potential_nash::games::cournot::{make_cournot, CournotConfig, CournotGame};
use potential_nash::games::toy::{make_toy, QuadraticToyGame};
use potential_nash::games::weighted::{make_weighted, WeightedGame};
use potential_nash::model::{Game, MisspecifiedGame};
use potential_nash::schedule::DelayLaw;
use potential_nash::StreamFactory;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSection,
    pub algo: AlgoSection,
    pub run: RunSection,
    #[serde(default)]
    pub out: OutSection,
    #[serde(default)]
    pub compare: Option<CompareSection>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    /// `toy`, `congestion`, `cournot`, or a path to a game file.
    pub kind: String,
    /// Toy-game gradient noise level.
    #[serde(default)]
    pub sigma: f64,
    /// Belief initialization: `prior`, `true`, or `relative:<frac>`.
    #[serde(default)]
    pub theta_init: Option<String>,
    /// Wraps the game as a weighted potential game.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    /// Redraw randomly parameterized instances per replication.
    #[serde(default = "default_true")]
    pub redraw_per_replication: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum MuValue {
    Scalar(f64),
    PerPlayer(Vec<f64>),
}

impl MuValue {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            MuValue::Scalar(v) => vec![*v],
            MuValue::PerPlayer(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgoSection {
    /// `prox_br`, `grad_response`, `pure_br`, `prox_br_learning`, `async_sg`.
    pub kind: String,
    #[serde(default = "default_mu")]
    pub mu: MuValue,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub tau: u32,
    /// `fixed` (uses `beta`), `inv_lg`, or `theorem_range`.
    #[serde(default = "default_beta_rule")]
    pub beta_rule: String,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Activation probabilities; omitted means uniform.
    #[serde(default)]
    pub p: Option<Vec<f64>>,
    #[serde(default = "default_max_inner")]
    pub max_inner_steps: u64,
    #[serde(default)]
    pub exact_inner: bool,
    #[serde(default)]
    pub inject_eps: Option<InjectSection>,
    /// `uniform` (default) or `constant`.
    #[serde(default)]
    pub delay_law: Option<String>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectSection {
    pub scale: f64,
    pub exponent: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_one")]
    pub replications: u64,
    /// Metric logging grid.
    #[serde(default = "default_thinning")]
    pub thinning: u64,
    /// Known equilibrium for distance logging.
    #[serde(default)]
    pub reference: Option<Vec<f64>>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutSection {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default)]
    pub snapshots: bool,
}

impl Default for OutSection {
    fn default() -> Self {
        OutSection { dir: default_dir(), snapshots: false }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    /// Accuracy grid; defaults to nine points spanning 1 to 1e-4.
    #[serde(default)]
    pub eps: Option<Vec<f64>>,
    pub sg_horizon: u64,
    #[serde(default = "default_sg_thinning")]
    pub sg_thinning: u64,
    /// Iteration cap for the reference equilibrium solve.
    #[serde(default = "default_ref_iters")]
    pub reference_max_iters: u64,
}

fn default_true() -> bool {
    true
}
fn default_mu() -> MuValue {
    MuValue::Scalar(1.0)
}
fn default_delta() -> f64 {
    0.5
}
fn default_beta_rule() -> String {
    "fixed".into()
}
fn default_beta() -> f64 {
    0.1
}
fn default_max_inner() -> u64 {
    1_000_000
}
fn default_one() -> u64 {
    1
}
fn default_thinning() -> u64 {
    10
}
fn default_dir() -> String {
    "out".into()
}
fn default_sg_thinning() -> u64 {
    500
}
fn default_ref_iters() -> u64 {
    2_000_000
}

/// Game file for `game.kind = "<path>"`: the kind plus its parameter table.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub kind: String,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub congestion: Option<CongestionConfig>,
    #[serde(default)]
    pub cournot: Option<CournotConfig>,
}

impl ExperimentConfig {
    pub fn from_str(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text).context("invalid experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        ExperimentConfig::from_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.replications < 1 {
            bail!("run.replications must be at least 1");
        }
        if self.run.horizon < 1 {
            bail!("run.horizon must be at least 1");
        }
        self.algorithm()?;
        self.theta_init()?;
        if let Some(c) = &self.compare {
            if let Some(eps) = &c.eps {
                if eps.iter().any(|e| !(*e > 0.0)) {
                    bail!("compare.eps entries must be positive");
                }
            }
        }
        Ok(())
    }

    pub fn algorithm(&self) -> Result<Algorithm> {
        Ok(match self.algo.kind.as_str() {
            "prox_br" => Algorithm::ProxBr,
            "grad_response" => Algorithm::GradResponse,
            "pure_br" => Algorithm::PureBr,
            "prox_br_learning" => Algorithm::ProxBrLearning,
            "async_sg" => Algorithm::AsyncSg,
            other => bail!("unknown algo.kind '{other}'"),
        })
    }

    pub fn beta_rule(&self) -> Result<BetaRule> {
        Ok(match self.algo.beta_rule.as_str() {
            "fixed" => BetaRule::Fixed(self.algo.beta),
            "inv_lg" => BetaRule::InvLg,
            "theorem_range" => BetaRule::TheoremRange,
            other => bail!("unknown algo.beta_rule '{other}'"),
        })
    }

    pub fn theta_init(&self) -> Result<ThetaInit> {
        let Some(s) = &self.game.theta_init else {
            return Ok(ThetaInit::PriorBox);
        };
        if s == "prior" {
            return Ok(ThetaInit::PriorBox);
        }
        if s == "true" {
            return Ok(ThetaInit::TrueValue);
        }
        if let Some(f) = s.strip_prefix("relative:") {
            let f: f64 = f.parse().map_err(|_| anyhow!("bad relative fraction in '{s}'"))?;
            return Ok(ThetaInit::Relative(f));
        }
        bail!("unknown game.theta_init '{s}' (expected prior | true | relative:<frac>)")
    }

    pub fn delay_law(&self) -> Result<DelayLaw> {
        Ok(match self.algo.delay_law.as_deref() {
            None | Some("uniform") => DelayLaw::UniformIid,
            Some("constant") => DelayLaw::Constant,
            Some(other) => bail!("unknown algo.delay_law '{other}'"),
        })
    }

    /// Engine configuration with the given replication seed.
    pub fn to_run_config(&self, seed: u64) -> Result<RunConfig> {
        let mut rc = RunConfig::new(self.algorithm()?, self.run.horizon);
        rc.mu = self.algo.mu.to_vec();
        rc.delta = self.algo.delta;
        rc.tau = self.algo.tau;
        rc.delay_law = self.delay_law()?;
        rc.activation = self.algo.p.clone();
        rc.beta_rule = self.beta_rule()?;
        rc.seed = seed;
        rc.metrics_every = self.run.thinning;
        rc.max_inner_steps = self.algo.max_inner_steps;
        rc.exact_inner = self.algo.exact_inner;
        rc.inject_noise = self
            .algo
            .inject_eps
            .map(|i| NoiseInjection { scale: i.scale, exponent: i.exponent });
        rc.reference = self.run.reference.clone();
        rc.x0 = self.run.x0.clone();
        rc.theta_init = self.theta_init()?;
        rc.snapshots = self.out.snapshots;
        Ok(rc)
    }
}

/// A constructed game instance, ready for the engine.
#[derive(Clone)]
pub enum GameInstance {
    Toy(Arc<QuadraticToyGame>),
    Congestion(Arc<CongestionGame>),
    Cournot(Arc<CournotGame>),
    Weighted(Arc<WeightedGame>),
}

impl GameInstance {
    pub fn as_game(&self) -> &dyn Game {
        match self {
            GameInstance::Toy(g) => g.as_ref(),
            GameInstance::Congestion(g) => g.as_ref(),
            GameInstance::Cournot(g) => g.as_ref(),
            GameInstance::Weighted(g) => g.as_ref(),
        }
    }

    pub fn as_misspecified(&self) -> Option<&dyn MisspecifiedGame> {
        match self {
            GameInstance::Cournot(g) => Some(g.as_ref()),
            _ => None,
        }
    }
}

/// Builds the configured game. Randomly parameterized games draw from the
/// supplied stream factory.
pub fn build_game(section: &GameSection, factory: &StreamFactory) -> Result<GameInstance> {
    let base = match section.kind.as_str() {
        "toy" => GameInstance::Toy(Arc::new(make_toy(section.sigma)?)),
        "congestion" => {
            GameInstance::Congestion(Arc::new(make_congestion(CongestionConfig::paper_default())?))
        }
        "cournot" => {
            GameInstance::Cournot(Arc::new(make_cournot(&CournotConfig::paper_default(), factory)?))
        }
        path => {
            let p = Path::new(path);
            if !p.exists() {
                bail!("game.kind '{path}' is neither a built-in game nor an existing file");
            }
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read game file {path}"))?;
            let file: GameFile = toml::from_str(&text).context("invalid game file")?;
            match file.kind.as_str() {
                "toy" => GameInstance::Toy(Arc::new(make_toy(file.sigma)?)),
                "congestion" => {
                    let cfg = file
                        .congestion
                        .ok_or_else(|| anyhow!("game file kind=congestion needs a [congestion] table"))?;
                    GameInstance::Congestion(Arc::new(make_congestion(cfg)?))
                }
                "cournot" => {
                    let cfg = file
                        .cournot
                        .ok_or_else(|| anyhow!("game file kind=cournot needs a [cournot] table"))?;
                    GameInstance::Cournot(Arc::new(make_cournot(&cfg, factory)?))
                }
                other => bail!("unknown game file kind '{other}'"),
            }
        }
    };
    match &section.weights {
        None => Ok(base),
        Some(w) => {
            let inner: Arc<dyn Game> = match base {
                GameInstance::Toy(g) => g,
                GameInstance::Congestion(g) => g,
                GameInstance::Cournot(_) => {
                    bail!("weighted wrapping of the misspecified game is not supported")
                }
                GameInstance::Weighted(_) => unreachable!(),
            };
            Ok(GameInstance::Weighted(Arc::new(make_weighted(inner, w.clone())?)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
game.kind = "toy"
algo.kind = "prox_br"
algo.mu = 1.0
algo.delta = 0.5
algo.tau = 0
run.horizon = 100
run.seed = 7
run.replications = 2
run.thinning = 10
out.dir = "out/test"
"#;

    #[test]
    fn parses_flat_dotted_keys() {
        let cfg = ExperimentConfig::from_str(MINIMAL).unwrap();
        assert_eq!(cfg.game.kind, "toy");
        assert_eq!(cfg.run.horizon, 100);
        assert_eq!(cfg.run.replications, 2);
        assert_eq!(cfg.out.dir, "out/test");
        assert_eq!(cfg.algorithm().unwrap(), Algorithm::ProxBr);
        let rc = cfg.to_run_config(42).unwrap();
        assert_eq!(rc.seed, 42);
        assert_eq!(rc.metrics_every, 10);
    }

    #[test]
    fn per_player_mu_accepted() {
        let text = MINIMAL.replace("algo.mu = 1.0", "algo.mu = [1.0, 2.0]");
        let cfg = ExperimentConfig::from_str(&text).unwrap();
        assert_eq!(cfg.to_run_config(0).unwrap().mu, vec![1.0, 2.0]);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}\nrun.bogus = 3\n");
        assert!(ExperimentConfig::from_str(&text).is_err());
    }

    #[test]
    fn beta_rules_parse() {
        for (s, want) in [
            ("fixed", BetaRule::Fixed(0.1)),
            ("inv_lg", BetaRule::InvLg),
            ("theorem_range", BetaRule::TheoremRange),
        ] {
            let text = format!("{MINIMAL}\nalgo.beta_rule = \"{s}\"\n")
                .replace("algo.kind = \"prox_br\"", "algo.kind = \"prox_br_learning\"");
            let cfg = ExperimentConfig::from_str(&text).unwrap();
            assert_eq!(cfg.beta_rule().unwrap(), want);
        }
    }

    #[test]
    fn theta_init_parse() {
        let mut cfg = ExperimentConfig::from_str(MINIMAL).unwrap();
        cfg.game.theta_init = Some("relative:0.02".into());
        assert_eq!(cfg.theta_init().unwrap(), ThetaInit::Relative(0.02));
        cfg.game.theta_init = Some("true".into());
        assert_eq!(cfg.theta_init().unwrap(), ThetaInit::TrueValue);
        cfg.game.theta_init = Some("bogus".into());
        assert!(cfg.theta_init().is_err());
    }

    #[test]
    fn builds_builtin_games() {
        let f = StreamFactory::from_seed(0);
        let cfg = ExperimentConfig::from_str(MINIMAL).unwrap();
        assert_eq!(build_game(&cfg.game, &f).unwrap().as_game().player_count(), 2);
        let mut g = cfg.game.clone();
        g.kind = "congestion".into();
        assert_eq!(build_game(&g, &f).unwrap().as_game().player_count(), 8);
        g.kind = "cournot".into();
        let built = build_game(&g, &f).unwrap();
        assert_eq!(built.as_game().player_count(), 13);
        assert!(built.as_misspecified().is_some());
    }
}
