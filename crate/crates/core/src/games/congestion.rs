//! Capacitated network congestion game.
//!
//! Each of `N` users routes a scalar flow along a fixed link path. The
//! expected objective is the link-price total minus a concave log utility,
//!
//! `f_i(x) = sum_{l in path_i} a_l / (b_l - S_l) - E[xi_i log(1 + x_i + zeta_i)]`,
//!
//! where `S_l` aggregates the flows crossing link `l`. Link capacities couple
//! the strategy sets (`A x <= c`), so the game is a generalized potential
//! game: the joint set is the routing polytope, and the per-player feasible
//! interval is recomputed from the current rival profile at every update.
//!
//! With uniform noise laws the expectations have elementary closed forms,
//! which the deterministic gradient, objective, and potential use directly:
//! for `zeta ~ U[zl, zr]`,
//! `E[1/(1+x+zeta)] = (ln(1+x+zr) - ln(1+x+zl)) / (zr - zl)` and
//! `E[ln(1+x+zeta)] = (phi(1+x+zr) - phi(1+x+zl)) / (zr - zl)` with
//! `phi(u) = u ln u - u`.

use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::{BlockLayout, Game, PlayerId, StrategyProfile};
use crate::sets::{feasible_interval, CoupledFlowBounds, FeasibleSet, Polytope};

/// Stale rival views can transiently overload a link; the price denominator
/// is floored there so sampled gradients stay finite. Committed profiles are
/// always feasible and never hit the floor.
const MIN_DENOM: f64 = 1e-6;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinkConfig {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UserConfig {
    /// Links on the user's path, 0-based.
    pub path: Vec<usize>,
    pub x_max: f64,
    /// Uniform law of the utility weight.
    pub xi: (f64, f64),
    /// Uniform law of the utility shift.
    pub zeta: (f64, f64),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CongestionConfig {
    pub links: Vec<LinkConfig>,
    pub users: Vec<UserConfig>,
}

impl CongestionConfig {
    /// The 8-user, 12-link benchmark network.
    pub fn paper_default() -> CongestionConfig {
        let a = [5.0, 4.0, 3.0, 5.0, 4.0, 3.0, 5.0, 4.0, 3.0, 5.0, 4.0, 3.0];
        let b = [6.0, 10.0, 8.0, 6.0, 9.0, 5.0, 6.0, 5.0, 6.0, 6.0, 8.0, 9.0];
        let c = [5.0, 8.0, 6.0, 5.0, 8.0, 4.0, 5.0, 4.0, 4.0, 5.0, 7.0, 8.0];
        let links = (0..12).map(|l| LinkConfig { a: a[l], b: b[l], c: c[l] }).collect();
        let paths: [&[usize]; 8] = [
            &[0, 1, 11],
            &[2, 3, 4],
            &[9, 10, 11],
            &[5, 8, 11],
            &[4, 7],
            &[0, 1, 6],
            &[2, 9, 10],
            &[5],
        ];
        let x_max = [3.0, 4.0, 4.0, 3.0, 5.0, 3.0, 4.0, 3.0];
        let users = (0..8)
            .map(|i| UserConfig {
                path: paths[i].to_vec(),
                x_max: x_max[i],
                xi: (10.0, 12.0),
                zeta: (0.0, 1.0),
            })
            .collect();
        CongestionConfig { links, users }
    }
}

#[derive(Debug)]
pub struct CongestionGame {
    layout: Arc<BlockLayout>,
    links: Vec<LinkConfig>,
    users: Vec<UserConfig>,
    bounds: CoupledFlowBounds,
    lipschitz: Vec<f64>,
    m_bound: f64,
}

pub fn make_congestion(cfg: CongestionConfig) -> Result<CongestionGame> {
    if cfg.users.is_empty() || cfg.links.is_empty() {
        return Err(CoreError::invalid("congestion game needs users and links"));
    }
    for (l, link) in cfg.links.iter().enumerate() {
        if !(link.a > 0.0 && link.b > 0.0) {
            return Err(CoreError::invalid(format!("link {l}: price parameters must be positive")));
        }
        if !(link.c >= 0.0 && link.c < link.b) {
            return Err(CoreError::invalid(format!(
                "link {l}: capacity {} must satisfy 0 <= c < b = {}",
                link.c, link.b
            )));
        }
    }
    for (i, u) in cfg.users.iter().enumerate() {
        if u.x_max < 0.0 {
            return Err(CoreError::invalid(format!("user {i}: negative flow bound")));
        }
        if u.path.iter().any(|&l| l >= cfg.links.len()) {
            return Err(CoreError::invalid(format!("user {i}: path references unknown link")));
        }
        if !(u.xi.0 <= u.xi.1 && u.zeta.0 <= u.zeta.1) {
            return Err(CoreError::invalid(format!("user {i}: malformed noise law")));
        }
        if u.zeta.0 <= -1.0 {
            return Err(CoreError::invalid(format!("user {i}: zeta law leaves log undefined")));
        }
    }

    let n = cfg.users.len();
    let layout = BlockLayout::scalar(n)?;
    let bounds = CoupledFlowBounds {
        links_of: cfg.users.iter().map(|u| u.path.clone()).collect(),
        capacity: cfg.links.iter().map(|l| l.c).collect(),
        x_max: cfg.users.iter().map(|u| u.x_max).collect(),
    };

    // Analytic per-player Lipschitz constants: a row bound of the gradient
    // Jacobian on the feasible set, where b_l - S_l >= b_l - c_l.
    let mut lipschitz = vec![0.0; n];
    for i in 0..n {
        let mut row2 = 0.0;
        for j in 0..n {
            let mut h = 0.0;
            for &l in &cfg.users[i].path {
                if cfg.users[j].path.contains(&l) {
                    let link = &cfg.links[l];
                    h += 2.0 * link.a / (link.b - link.c).powi(3);
                }
            }
            if j == i {
                h += utility_curvature_max(&cfg.users[i]);
            }
            row2 += h * h;
        }
        lipschitz[i] = row2.sqrt();
    }

    // Second-moment bound on the sampled gradient over feasible profiles.
    let m_bound = (0..n)
        .map(|i| {
            let price: f64 = cfg.users[i]
                .path
                .iter()
                .map(|&l| cfg.links[l].a / (cfg.links[l].b - cfg.links[l].c).powi(2))
                .sum();
            let util = cfg.users[i].xi.1 / (1.0 + cfg.users[i].zeta.0);
            price + util
        })
        .fold(0.0, f64::max);

    Ok(CongestionGame { layout, links: cfg.links, users: cfg.users, bounds, lipschitz, m_bound })
}

fn utility_curvature_max(u: &UserConfig) -> f64 {
    // Peak of E[xi] * E[1/(1+x+zeta)^2] over x >= 0, attained at x = 0.
    let mean_xi = 0.5 * (u.xi.0 + u.xi.1);
    mean_xi * mean_inv_sq(0.0, u.zeta)
}

fn mean_inv(x: f64, zeta: (f64, f64)) -> f64 {
    let (zl, zr) = zeta;
    if zr - zl < 1e-12 {
        1.0 / (1.0 + x + zl)
    } else {
        (((1.0 + x + zr) / (1.0 + x + zl)).ln()) / (zr - zl)
    }
}

fn mean_inv_sq(x: f64, zeta: (f64, f64)) -> f64 {
    let (zl, zr) = zeta;
    if zr - zl < 1e-12 {
        1.0 / (1.0 + x + zl).powi(2)
    } else {
        (1.0 / (1.0 + x + zl) - 1.0 / (1.0 + x + zr)) / (zr - zl)
    }
}

fn mean_log(x: f64, zeta: (f64, f64)) -> f64 {
    let (zl, zr) = zeta;
    let phi = |u: f64| u * u.ln() - u;
    if zr - zl < 1e-12 {
        (1.0 + x + zl).ln()
    } else {
        (phi(1.0 + x + zr) - phi(1.0 + x + zl)) / (zr - zl)
    }
}

impl CongestionGame {
    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn link(&self, l: usize) -> &LinkConfig {
        &self.links[l]
    }

    pub fn user(&self, i: usize) -> &UserConfig {
        &self.users[i]
    }

    pub fn flow_bounds(&self) -> &CoupledFlowBounds {
        &self.bounds
    }

    fn link_load(&self, l: usize, x: &StrategyProfile) -> f64 {
        self.users
            .iter()
            .enumerate()
            .filter(|(_, u)| u.path.contains(&l))
            .map(|(j, _)| x.block(PlayerId(j))[0])
            .sum()
    }

    fn price_slope(&self, i: usize, x: &StrategyProfile) -> f64 {
        self.users[i]
            .path
            .iter()
            .map(|&l| {
                let den = (self.links[l].b - self.link_load(l, x)).max(MIN_DENOM);
                self.links[l].a / (den * den)
            })
            .sum()
    }
}

impl Game for CongestionGame {
    fn player_count(&self) -> usize {
        self.users.len()
    }

    fn layout(&self) -> Arc<BlockLayout> {
        self.layout.clone()
    }

    fn strategy_set(&self, i: PlayerId) -> FeasibleSet {
        FeasibleSet::Interval { lo: 0.0, hi: self.users[i.0].x_max }
    }

    fn effective_set(&self, i: PlayerId, current: &StrategyProfile) -> Result<FeasibleSet> {
        feasible_interval(&self.bounds, i, current)
    }

    fn is_generalized(&self) -> bool {
        true
    }

    fn joint_set(&self) -> Result<FeasibleSet> {
        let n = self.users.len();
        let a: Vec<Vec<f64>> = (0..self.links.len())
            .map(|l| {
                (0..n)
                    .map(|i| if self.users[i].path.contains(&l) { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        let c = self.links.iter().map(|l| l.c).collect();
        let lo = vec![0.0; n];
        let hi = self.users.iter().map(|u| u.x_max).collect();
        Ok(FeasibleSet::Polytope(Polytope::new(a, c, lo, hi)?))
    }

    fn sample_gradient_into(
        &self,
        i: PlayerId,
        view: &StrategyProfile,
        out: &mut [f64],
        rng: &mut dyn RngCore,
    ) -> Result<()> {
        self.check_view(view)?;
        let u = &self.users[i.0];
        let xi = if u.xi.1 > u.xi.0 { rng.gen_range(u.xi.0..u.xi.1) } else { u.xi.0 };
        let zeta = if u.zeta.1 > u.zeta.0 { rng.gen_range(u.zeta.0..u.zeta.1) } else { u.zeta.0 };
        let x_i = view.block(i)[0];
        out[0] = self.price_slope(i.0, view) - xi / (1.0 + x_i + zeta);
        Ok(())
    }

    fn exact_gradient_into(&self, i: PlayerId, x: &StrategyProfile, out: &mut [f64]) -> Result<()> {
        self.check_view(x)?;
        let u = &self.users[i.0];
        let mean_xi = 0.5 * (u.xi.0 + u.xi.1);
        let x_i = x.block(i)[0];
        out[0] = self.price_slope(i.0, x) - mean_xi * mean_inv(x_i, u.zeta);
        Ok(())
    }

    fn has_exact_gradient(&self) -> bool {
        true
    }

    fn objective(&self, i: PlayerId, x: &StrategyProfile) -> Option<f64> {
        let u = &self.users[i.0];
        let price: f64 = u
            .path
            .iter()
            .map(|&l| self.links[l].a / (self.links[l].b - self.link_load(l, x)).max(MIN_DENOM))
            .sum();
        let mean_xi = 0.5 * (u.xi.0 + u.xi.1);
        Some(price - mean_xi * mean_log(x.block(i)[0], u.zeta))
    }

    fn potential(&self, x: &StrategyProfile) -> Result<f64> {
        self.check_view(x)?;
        let price: f64 = (0..self.links.len())
            .map(|l| self.links[l].a / (self.links[l].b - self.link_load(l, x)).max(MIN_DENOM))
            .sum();
        let utility: f64 = self
            .users
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let mean_xi = 0.5 * (u.xi.0 + u.xi.1);
                mean_xi * mean_log(x.block(PlayerId(i))[0], u.zeta)
            })
            .sum();
        Ok(price - utility)
    }

    fn has_potential(&self) -> bool {
        true
    }

    fn lipschitz(&self, i: PlayerId) -> f64 {
        self.lipschitz[i.0]
    }

    fn grad_bound(&self) -> f64 {
        self.m_bound
    }
}
