//! Named experiment presets reproducing the benchmark studies at desk scale.

use crate::config::ExperimentConfig;

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    toml: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "toy-prox",
        description: "noise-free quadratic toy, proximal best response; converges to (1/3, 1/3)",
        toml: r#"
game.kind = "toy"
game.sigma = 0.0
algo.kind = "prox_br"
algo.mu = 1.0
algo.delta = 0.5
algo.tau = 0
algo.max_inner_steps = 64
run.horizon = 500
run.seed = 1
run.replications = 1
run.thinning = 10
run.reference = [0.3333333333333333, 0.3333333333333333]
out.dir = "out/toy-prox"
"#,
    },
    Preset {
        name: "toy-pure",
        description: "noise-free toy, exact pure best response (delay-free, strongly convex)",
        toml: r#"
game.kind = "toy"
algo.kind = "pure_br"
algo.mu = 1.0
algo.delta = 0.5
algo.tau = 0
algo.exact_inner = true
run.horizon = 200
run.seed = 1
run.replications = 1
run.thinning = 10
run.reference = [0.3333333333333333, 0.3333333333333333]
out.dir = "out/toy-pure"
"#,
    },
    Preset {
        name: "congestion-fig2",
        description: "8-user congestion network, single sample path with per-iteration flow snapshots",
        toml: r#"
game.kind = "congestion"
algo.kind = "prox_br"
algo.mu = 1.0
algo.delta = 0.5
algo.tau = 4
algo.p = [0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125]
run.horizon = 300
run.seed = 7
run.replications = 1
run.thinning = 1
out.dir = "out/congestion-fig2"
out.snapshots = true
"#,
    },
    Preset {
        name: "congestion-fig3",
        description: "8-user congestion network, 50-path mean of the stationarity gap",
        toml: r#"
game.kind = "congestion"
algo.kind = "prox_br"
algo.mu = 1.0
algo.delta = 0.5
algo.tau = 4
algo.p = [0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125]
run.horizon = 300
run.seed = 7
run.replications = 50
run.thinning = 10
out.dir = "out/congestion-fig3"
"#,
    },
    Preset {
        name: "cournot-fig5",
        description: "13-firm Cournot market with belief learning, single sample path",
        toml: r#"
game.kind = "cournot"
game.theta_init = "prior"
algo.kind = "prox_br_learning"
algo.mu = 5.0
algo.delta = 0.5
algo.tau = 4
algo.beta_rule = "fixed"
algo.beta = 0.1
run.horizon = 800
run.seed = 5
run.replications = 1
run.thinning = 10
out.dir = "out/cournot-fig5"
"#,
    },
    Preset {
        name: "cournot-compare",
        description: "delay-free Cournot: best response with learning vs the stochastic gradient baseline",
        toml: r#"
game.kind = "cournot"
game.theta_init = "prior"
game.redraw_per_replication = false
algo.kind = "prox_br_learning"
algo.mu = 5.0
algo.delta = 0.5
algo.tau = 0
algo.beta_rule = "fixed"
algo.beta = 0.1
run.horizon = 1500
run.seed = 11
run.replications = 10
run.thinning = 5
out.dir = "out/cournot-compare"
compare.sg_horizon = 4000000
compare.sg_thinning = 2000
"#,
    },
];

pub fn get(name: &str) -> Option<ExperimentConfig> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .map(|p| ExperimentConfig::from_str(p.toml).expect("presets are valid"))
}

pub fn listing() -> String {
    let mut s = String::new();
    for p in PRESETS {
        s.push_str(&format!("{:<18} {}\n", p.name, p.description));
    }
    s
}
