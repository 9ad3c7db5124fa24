//! Networked Cournot competition with misspecified price parameters.
//!
//! Firms ship quantities to the markets they are connected to. Market `j`
//! prices linearly with noise, `p_j = a_j + zeta_j - b_j S_j`, where `S_j` is
//! the aggregate quantity delivered to `j`. Firm `i` minimizes
//!
//! `f_i(x; theta) = cost_i . x_i - sum_j (a_j - b_j S_j) x_{i,j}`,
//!
//! but the true slope/intercept pair `theta* = (a*, b*)` is unknown: each
//! firm keeps a per-market belief and refines it by least squares on observed
//! `(S_j, p_j)` pairs drawn from historical sales. The game admits the exact
//! potential
//!
//! `P(x) = sum_i cost_i . x_i - sum_j a_j S_j
//!         + 1/2 sum_{i,j} b_j x_{i,j}^2 + 1/2 sum_j b_j S_j^2`.

use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::{BlockLayout, Game, MisspecifiedGame, PlayerId, StrategyProfile};
use crate::rng::StreamFactory;
use crate::sets::FeasibleSet;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CournotConfig {
    pub markets: usize,
    /// Markets each firm ships to, 0-based.
    pub firm_markets: Vec<Vec<usize>>,
    pub cap_range: (f64, f64),
    pub cost_range: (f64, f64),
    pub a_range: (f64, f64),
    pub b_range: (f64, f64),
    /// Cost disturbance `xi ~ U[-frac c, frac c]`.
    pub cost_noise_frac: f64,
    /// Price disturbance `zeta ~ U[-frac a, frac a]`.
    pub price_noise_frac: f64,
    /// Law of historical aggregate sales used by the learning oracle.
    pub sales_range: (f64, f64),
}

impl CournotConfig {
    /// The 13-firm, 7-market benchmark network.
    pub fn paper_default() -> CournotConfig {
        let firm_markets: Vec<Vec<usize>> = vec![
            vec![0, 1],
            vec![1, 2],
            vec![2],
            vec![0],
            vec![0, 1, 2, 3],
            vec![2, 3, 4],
            vec![2, 4],
            vec![0, 3, 5],
            vec![4],
            vec![4, 6],
            vec![5, 6],
            vec![5, 6],
            vec![4, 6],
        ];
        CournotConfig {
            markets: 7,
            firm_markets,
            cap_range: (5.0, 8.0),
            cost_range: (2.0, 4.0),
            a_range: (4.0, 6.0),
            b_range: (0.2, 0.4),
            cost_noise_frac: 1.0 / 8.0,
            price_noise_frac: 1.0 / 8.0,
            sales_range: (0.0, 5.0),
        }
    }
}

#[derive(Debug)]
pub struct CournotGame {
    layout: Arc<BlockLayout>,
    markets: usize,
    firm_markets: Vec<Vec<usize>>,
    cap: Vec<Vec<f64>>,
    cost: Vec<Vec<f64>>,
    a_true: Vec<f64>,
    b_true: Vec<f64>,
    /// Half-widths of the uniform noise laws (zero disables the noise).
    cost_noise_half: Vec<Vec<f64>>,
    price_noise_half: Vec<f64>,
    sales_range: (f64, f64),
    a_range: (f64, f64),
    b_range: (f64, f64),
    l_x: f64,
    mu_g: f64,
    l_g: f64,
    m_bound: f64,
}

/// Draws an instance from the configured parameter laws under the stream
/// factory's "params" stream.
pub fn make_cournot(cfg: &CournotConfig, factory: &StreamFactory) -> Result<CournotGame> {
    let mut rng = factory.stream("params", 0);
    let draw = |rng: &mut dyn RngCore, (lo, hi): (f64, f64)| -> f64 {
        if hi > lo {
            rng.gen_range(lo..hi)
        } else {
            lo
        }
    };
    let n = cfg.firm_markets.len();
    let mut cap = Vec::with_capacity(n);
    let mut cost = Vec::with_capacity(n);
    for markets in &cfg.firm_markets {
        cap.push(markets.iter().map(|_| draw(&mut rng, cfg.cap_range)).collect::<Vec<f64>>());
        cost.push(markets.iter().map(|_| draw(&mut rng, cfg.cost_range)).collect::<Vec<f64>>());
    }
    let a_true: Vec<f64> = (0..cfg.markets).map(|_| draw(&mut rng, cfg.a_range)).collect();
    let b_true: Vec<f64> = (0..cfg.markets).map(|_| draw(&mut rng, cfg.b_range)).collect();
    CournotGame::from_parts(cfg, cap, cost, a_true, b_true)
}

impl CournotGame {
    /// Builds an instance from explicit parameters. `cfg` supplies the
    /// network and the noise/sales laws.
    pub fn from_parts(
        cfg: &CournotConfig,
        cap: Vec<Vec<f64>>,
        cost: Vec<Vec<f64>>,
        a_true: Vec<f64>,
        b_true: Vec<f64>,
    ) -> Result<CournotGame> {
        let n = cfg.firm_markets.len();
        if n == 0 {
            return Err(CoreError::invalid("cournot game needs at least one firm"));
        }
        if a_true.len() != cfg.markets || b_true.len() != cfg.markets {
            return Err(CoreError::invalid("price parameter length mismatch"));
        }
        if a_true.iter().any(|a| *a < 0.0) || b_true.iter().any(|b| !(*b > 0.0)) {
            return Err(CoreError::invalid("price parameters must satisfy a >= 0, b > 0"));
        }
        for (i, markets) in cfg.firm_markets.iter().enumerate() {
            if markets.is_empty() {
                return Err(CoreError::invalid(format!("firm {i} is connected to no market")));
            }
            if markets.iter().any(|&j| j >= cfg.markets) {
                return Err(CoreError::invalid(format!("firm {i} references unknown market")));
            }
            let mut sorted = markets.clone();
            sorted.dedup();
            if sorted.len() != markets.len() {
                return Err(CoreError::invalid(format!("firm {i} lists a market twice")));
            }
            if cap[i].len() != markets.len() || cost[i].len() != markets.len() {
                return Err(CoreError::invalid(format!("firm {i}: parameter length mismatch")));
            }
        }

        let layout = BlockLayout::new(cfg.firm_markets.iter().map(|m| m.len()).collect())?;
        let cost_noise_half: Vec<Vec<f64>> = cost
            .iter()
            .map(|ci| ci.iter().map(|c| c * cfg.cost_noise_frac).collect())
            .collect();
        let price_noise_half: Vec<f64> =
            a_true.iter().map(|a| a * cfg.price_noise_frac).collect();

        let mut game = CournotGame {
            layout,
            markets: cfg.markets,
            firm_markets: cfg.firm_markets.clone(),
            cap,
            cost,
            a_true,
            b_true,
            cost_noise_half,
            price_noise_half,
            sales_range: cfg.sales_range,
            a_range: cfg.a_range,
            b_range: cfg.b_range,
            l_x: 0.0,
            mu_g: 0.0,
            l_g: 0.0,
            m_bound: 0.0,
        };
        game.l_x = game.compute_lipschitz_x();
        let (mu_g, l_g) = game.compute_learning_constants();
        game.mu_g = mu_g;
        game.l_g = l_g;
        game.m_bound = game.compute_grad_bound();
        Ok(game)
    }

    /// One firm, one market: the scalar Cournot fixture with a closed-form
    /// equilibrium `clamp((a - c) / (2 b), 0, cap)`.
    pub fn single_market(cap: f64, cost: f64, a: f64, b: f64) -> Result<CournotGame> {
        let cfg = CournotConfig {
            markets: 1,
            firm_markets: vec![vec![0]],
            cap_range: (cap, cap),
            cost_range: (cost, cost),
            a_range: (a, a),
            b_range: (b, b),
            cost_noise_frac: 1.0 / 8.0,
            price_noise_frac: 1.0 / 8.0,
            sales_range: (0.0, 5.0),
        };
        CournotGame::from_parts(&cfg, vec![vec![cap]], vec![vec![cost]], vec![a], vec![b])
    }

    /// Disables both disturbance laws; used for stationarity fixtures.
    pub fn without_noise(mut self) -> CournotGame {
        for row in self.cost_noise_half.iter_mut() {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
        self.price_noise_half.iter_mut().for_each(|v| *v = 0.0);
        self
    }

    pub fn market_count(&self) -> usize {
        self.markets
    }

    pub fn firm_market_list(&self, i: PlayerId) -> &[usize] {
        &self.firm_markets[i.0]
    }

    pub fn true_price_params(&self) -> (&[f64], &[f64]) {
        (&self.a_true, &self.b_true)
    }

    fn market_loads(&self, x: &StrategyProfile) -> Vec<f64> {
        let mut s = vec![0.0; self.markets];
        for (i, markets) in self.firm_markets.iter().enumerate() {
            let block = x.block(PlayerId(i));
            for (p, &j) in markets.iter().enumerate() {
                s[j] += block[p];
            }
        }
        s
    }

    /// Gradient at an arbitrary (a, b) belief over the firm's markets; noise
    /// draws optional.
    fn gradient_at(
        &self,
        i: PlayerId,
        view: &StrategyProfile,
        theta_i: &[f64],
        out: &mut [f64],
        mut rng: Option<&mut dyn RngCore>,
    ) {
        let loads = self.market_loads(view);
        let block = view.block(i);
        for (p, &j) in self.firm_markets[i.0].iter().enumerate() {
            let (a, b) = (theta_i[2 * p], theta_i[2 * p + 1]);
            let mut c = self.cost[i.0][p];
            let mut price_shift = 0.0;
            if let Some(rng) = rng.as_deref_mut() {
                let ch = self.cost_noise_half[i.0][p];
                if ch > 0.0 {
                    c += rng.gen_range(-ch..ch);
                }
                let ph = self.price_noise_half[j];
                if ph > 0.0 {
                    price_shift = rng.gen_range(-ph..ph);
                }
            }
            out[p] = c - (a + price_shift) + b * loads[j] + b * block[p];
        }
    }

    fn theta_true_full(&self, i: PlayerId) -> Vec<f64> {
        let mut t = Vec::with_capacity(2 * self.firm_markets[i.0].len());
        for &j in &self.firm_markets[i.0] {
            t.push(self.a_true[j]);
            t.push(self.b_true[j]);
        }
        t
    }

    fn sales_moments(&self) -> (f64, f64) {
        let (lo, hi) = self.sales_range;
        let mean = 0.5 * (lo + hi);
        let second = if hi > lo { (hi.powi(3) - lo.powi(3)) / (3.0 * (hi - lo)) } else { lo * lo };
        (mean, second)
    }

    fn compute_learning_constants(&self) -> (f64, f64) {
        // Per-market Hessian of E[(a - b S - p)^2] in (a, b):
        // [[2, -2 E S], [-2 E S, 2 E S^2]]; beliefs stack block-diagonally,
        // so the extreme eigenvalues are those of one block.
        let (es, es2) = self.sales_moments();
        let tr = 2.0 + 2.0 * es2;
        let det = 4.0 * (es2 - es * es);
        let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
        let l_g = 0.5 * (tr + disc);
        let mu_g = 0.5 * (tr - disc);
        (mu_g, l_g)
    }

    fn compute_lipschitz_x(&self) -> f64 {
        // Largest singular value over firms of the gradient Jacobian
        // J_i = A_i^T B A + A_i^T B A_i, found by power iteration on J J^T.
        let n = self.layout.total_dim();
        let mut worst: f64 = 0.0;
        for (i, markets) in self.firm_markets.iter().enumerate() {
            let ni = markets.len();
            let mut jac = vec![vec![0.0; n]; ni];
            for (p, &j) in markets.iter().enumerate() {
                let b = self.b_true[j];
                for (k, mk) in self.firm_markets.iter().enumerate() {
                    for (q, &jq) in mk.iter().enumerate() {
                        if jq == j {
                            let col = self.layout.range(PlayerId(k)).start + q;
                            jac[p][col] += b;
                        }
                    }
                }
                let own = self.layout.range(PlayerId(i)).start + p;
                jac[p][own] += b;
            }
            // Gram matrix J J^T is ni x ni with ni <= markets.
            let mut gram = vec![vec![0.0; ni]; ni];
            for p in 0..ni {
                for q in 0..ni {
                    gram[p][q] = (0..n).map(|c| jac[p][c] * jac[q][c]).sum();
                }
            }
            let mut v = vec![1.0 / (ni as f64).sqrt(); ni];
            let mut lambda = 0.0;
            for _ in 0..200 {
                let mut w = vec![0.0; ni];
                for p in 0..ni {
                    for q in 0..ni {
                        w[p] += gram[p][q] * v[q];
                    }
                }
                let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm < 1e-300 {
                    break;
                }
                lambda = norm;
                for p in 0..ni {
                    v[p] = w[p] / norm;
                }
            }
            worst = worst.max(lambda.sqrt());
        }
        worst
    }

    fn compute_grad_bound(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut market_cap = vec![0.0; self.markets];
        for (i, markets) in self.firm_markets.iter().enumerate() {
            for (p, &j) in markets.iter().enumerate() {
                market_cap[j] += self.cap[i][p];
            }
        }
        for (i, markets) in self.firm_markets.iter().enumerate() {
            let norm2: f64 = markets
                .iter()
                .enumerate()
                .map(|(p, &j)| {
                    let c = self.cost[i][p] + self.cost_noise_half[i][p];
                    let a = self.a_true[j] + self.price_noise_half[j];
                    let b = self.b_true[j];
                    let g = c + a + b * (market_cap[j] + self.cap[i][p]);
                    g * g
                })
                .sum();
            worst = worst.max(norm2.sqrt());
        }
        worst
    }
}

impl Game for CournotGame {
    fn player_count(&self) -> usize {
        self.firm_markets.len()
    }

    fn layout(&self) -> Arc<BlockLayout> {
        self.layout.clone()
    }

    fn strategy_set(&self, i: PlayerId) -> FeasibleSet {
        FeasibleSet::Box { lo: vec![0.0; self.cap[i.0].len()], hi: self.cap[i.0].clone() }
    }

    fn joint_set(&self) -> Result<FeasibleSet> {
        let lo = vec![0.0; self.layout.total_dim()];
        let hi: Vec<f64> = self.cap.iter().flatten().copied().collect();
        FeasibleSet::bounded_box(lo, hi)
    }

    fn sample_gradient_into(
        &self,
        i: PlayerId,
        view: &StrategyProfile,
        out: &mut [f64],
        rng: &mut dyn RngCore,
    ) -> Result<()> {
        self.check_view(view)?;
        let theta = self.theta_true_full(i);
        self.gradient_at(i, view, &theta, out, Some(rng));
        Ok(())
    }

    fn exact_gradient_into(&self, i: PlayerId, x: &StrategyProfile, out: &mut [f64]) -> Result<()> {
        self.check_view(x)?;
        let theta = self.theta_true_full(i);
        self.gradient_at(i, x, &theta, out, None);
        Ok(())
    }

    fn has_exact_gradient(&self) -> bool {
        true
    }

    fn objective(&self, i: PlayerId, x: &StrategyProfile) -> Option<f64> {
        let loads = self.market_loads(x);
        let block = x.block(i);
        let mut f = 0.0;
        for (p, &j) in self.firm_markets[i.0].iter().enumerate() {
            f += block[p] * (self.cost[i.0][p] - self.a_true[j] + self.b_true[j] * loads[j]);
        }
        Some(f)
    }

    fn potential(&self, x: &StrategyProfile) -> Result<f64> {
        self.check_view(x)?;
        let loads = self.market_loads(x);
        let mut p_val = 0.0;
        for (i, markets) in self.firm_markets.iter().enumerate() {
            let block = x.block(PlayerId(i));
            for (p, &j) in markets.iter().enumerate() {
                p_val += self.cost[i][p] * block[p] + 0.5 * self.b_true[j] * block[p] * block[p];
            }
        }
        for j in 0..self.markets {
            p_val += -self.a_true[j] * loads[j] + 0.5 * self.b_true[j] * loads[j] * loads[j];
        }
        Ok(p_val)
    }

    fn has_potential(&self) -> bool {
        true
    }

    fn lipschitz(&self, _i: PlayerId) -> f64 {
        self.l_x
    }

    fn strong_convexity(&self, i: PlayerId) -> Option<f64> {
        self.firm_markets[i.0]
            .iter()
            .map(|&j| 2.0 * self.b_true[j])
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
    }

    fn grad_bound(&self) -> f64 {
        self.m_bound
    }
}

impl MisspecifiedGame for CournotGame {
    fn theta_dim(&self, i: PlayerId) -> usize {
        2 * self.firm_markets[i.0].len()
    }

    fn theta_set(&self, i: PlayerId) -> FeasibleSet {
        FeasibleSet::NonnegOrthant { dim: self.theta_dim(i) }
    }

    fn theta_true(&self, i: PlayerId) -> Vec<f64> {
        self.theta_true_full(i)
    }

    fn theta_prior_box(&self, i: PlayerId) -> (Vec<f64>, Vec<f64>) {
        let ni = self.firm_markets[i.0].len();
        let mut lo = Vec::with_capacity(2 * ni);
        let mut hi = Vec::with_capacity(2 * ni);
        for _ in 0..ni {
            lo.push(self.a_range.0);
            hi.push(self.a_range.1);
            lo.push(self.b_range.0);
            hi.push(self.b_range.1);
        }
        (lo, hi)
    }

    fn sample_gradient_at_into(
        &self,
        i: PlayerId,
        view: &StrategyProfile,
        theta_i: &[f64],
        out: &mut [f64],
        rng: &mut dyn RngCore,
    ) -> Result<()> {
        self.check_view(view)?;
        if theta_i.len() != self.theta_dim(i) {
            return Err(CoreError::Dimension {
                context: "belief vector",
                expected: self.theta_dim(i),
                got: theta_i.len(),
            });
        }
        self.gradient_at(i, view, theta_i, out, Some(rng));
        Ok(())
    }

    fn exact_gradient_at(&self, i: PlayerId, x: &StrategyProfile, theta_i: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.layout.dim(i)];
        self.gradient_at(i, x, theta_i, &mut out, None);
        out
    }

    fn sample_learning_gradient_into(
        &self,
        i: PlayerId,
        theta_i: &[f64],
        out: &mut [f64],
        rng: &mut dyn RngCore,
    ) {
        let (lo, hi) = self.sales_range;
        for (p, &j) in self.firm_markets[i.0].iter().enumerate() {
            let s = if hi > lo { rng.gen_range(lo..hi) } else { lo };
            let ph = self.price_noise_half[j];
            let zeta = if ph > 0.0 { rng.gen_range(-ph..ph) } else { 0.0 };
            let observed = self.a_true[j] + zeta - self.b_true[j] * s;
            let r = theta_i[2 * p] - theta_i[2 * p + 1] * s - observed;
            out[2 * p] = 2.0 * r;
            out[2 * p + 1] = -2.0 * r * s;
        }
    }

    fn learning_objective(&self, i: PlayerId, theta_i: &[f64]) -> f64 {
        let (es, es2) = self.sales_moments();
        let mut g = 0.0;
        for (p, &j) in self.firm_markets[i.0].iter().enumerate() {
            let da = theta_i[2 * p] - self.a_true[j];
            let db = theta_i[2 * p + 1] - self.b_true[j];
            let var_zeta = self.price_noise_half[j] * self.price_noise_half[j] / 3.0;
            g += da * da - 2.0 * da * db * es + db * db * es2 + var_zeta;
        }
        g
    }

    fn learning_gradient(&self, i: PlayerId, theta_i: &[f64]) -> Vec<f64> {
        let (es, es2) = self.sales_moments();
        let mut out = vec![0.0; theta_i.len()];
        for (p, &j) in self.firm_markets[i.0].iter().enumerate() {
            let da = theta_i[2 * p] - self.a_true[j];
            let db = theta_i[2 * p + 1] - self.b_true[j];
            out[2 * p] = 2.0 * da - 2.0 * db * es;
            out[2 * p + 1] = -2.0 * da * es + 2.0 * db * es2;
        }
        out
    }

    fn learning_constants(&self) -> (f64, f64) {
        (self.mu_g, self.l_g)
    }

    fn lipschitz_x(&self) -> f64 {
        self.l_x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{exact_gradient, potential_value};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn paper_instance(seed: u64) -> CournotGame {
        make_cournot(&CournotConfig::paper_default(), &StreamFactory::from_seed(seed)).unwrap()
    }

    #[test]
    fn single_market_gradient_value() {
        // cap 2? No: A = 1, cost 2, a = 5, b = 0.3, x = 1:
        // grad = 2 - 5 + 0.3 + 0.3 = -2.4.
        let g = CournotGame::single_market(10.0, 2.0, 5.0, 0.3).unwrap();
        let x = StrategyProfile::new(g.layout(), vec![1.0]).unwrap();
        let grad = exact_gradient(&g, PlayerId(0), &x).unwrap();
        assert_abs_diff_eq!(grad[0], -2.4, epsilon = 1e-12);
    }

    #[test]
    fn single_market_equilibrium_is_stationary() {
        let g = CournotGame::single_market(10.0, 2.0, 5.0, 0.3).unwrap();
        let star = ((5.0f64 - 2.0) / (2.0 * 0.3)).clamp(0.0, 10.0);
        assert_abs_diff_eq!(star, 5.0);
        let x = StrategyProfile::new(g.layout(), vec![star]).unwrap();
        let grad = exact_gradient(&g, PlayerId(0), &x).unwrap();
        assert_abs_diff_eq!(grad[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn paper_network_shape() {
        let g = paper_instance(0);
        assert_eq!(g.player_count(), 13);
        assert_eq!(g.market_count(), 7);
        assert_eq!(g.layout().total_dim(), 27);
        assert_eq!(g.firm_market_list(PlayerId(4)), &[0, 1, 2, 3]);
    }

    #[test]
    fn potential_identity_random_pairs() {
        let g = paper_instance(3);
        let mut rng = StreamFactory::from_seed(8).stream("pairs", 0);
        for _ in 0..100 {
            let vals: Vec<f64> = (0..27).map(|_| rng.gen_range(0.0..4.0)).collect();
            let x = StrategyProfile::new(g.layout(), vals).unwrap();
            let i = PlayerId(rng.gen_range(0..13));
            let mut xp = x.clone();
            let newblock: Vec<f64> =
                (0..g.layout().dim(i)).map(|_| rng.gen_range(0.0..4.0)).collect();
            xp.set_block(i, &newblock);
            let dp = potential_value(&g, &xp).unwrap() - potential_value(&g, &x).unwrap();
            let df = g.objective(i, &xp).unwrap() - g.objective(i, &x).unwrap();
            assert!((dp - df).abs() <= 1e-9, "potential identity violated: {dp} vs {df}");
        }
    }

    #[test]
    fn exact_gradient_matches_finite_differences() {
        let g = paper_instance(5);
        let mut rng = StreamFactory::from_seed(10).stream("points", 0);
        let vals: Vec<f64> = (0..27).map(|_| rng.gen_range(0.0..3.0)).collect();
        let x = StrategyProfile::new(g.layout(), vals).unwrap();
        for i in 0..13 {
            let i = PlayerId(i);
            let grad = exact_gradient(&g, i, &x).unwrap();
            for p in 0..g.layout().dim(i) {
                let h = 1e-6;
                let mut bp = x.block(i).to_vec();
                bp[p] += h;
                let mut xp = x.clone();
                xp.set_block(i, &bp);
                bp[p] -= 2.0 * h;
                let mut xm = x.clone();
                xm.set_block(i, &bp);
                let fd =
                    (g.objective(i, &xp).unwrap() - g.objective(i, &xm).unwrap()) / (2.0 * h);
                assert!((grad[p] - fd).abs() < 1e-5, "firm {i} coord {p}: {} vs {fd}", grad[p]);
            }
        }
    }

    #[test]
    fn learning_gradient_examples() {
        // theta = (4, 0.2); one observation (S = 2, p = 4.5):
        // r = 4 - 0.4 - 4.5 = -0.9, grad = (-1.8, 3.6);
        // a 0.1 step lands on (4.18, -0.16), projected to (4.18, 0).
        let g = CournotGame::single_market(10.0, 2.0, 4.0, 0.2).unwrap();
        let theta = [4.0, 0.2];
        let (s, p_obs) = (2.0, 4.5);
        let r: f64 = theta[0] - theta[1] * s - p_obs;
        assert_abs_diff_eq!(r, -0.9, epsilon = 1e-12);
        let grad = [2.0 * r, -2.0 * r * s];
        assert_abs_diff_eq!(grad[0], -1.8, epsilon = 1e-12);
        assert_abs_diff_eq!(grad[1], 3.6, epsilon = 1e-12);
        let stepped = [theta[0] - 0.1 * grad[0], theta[1] - 0.1 * grad[1]];
        let projected = g.theta_set(PlayerId(0)).project(&stepped).unwrap();
        assert_abs_diff_eq!(projected[0], 4.18, epsilon = 1e-12);
        assert_abs_diff_eq!(projected[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn learning_constants_from_sales_moments() {
        // S ~ U[0,5]: eigenvalues of [[2, -5], [-5, 50/3]].
        let g = CournotGame::single_market(10.0, 2.0, 5.0, 0.3).unwrap();
        let (mu_g, l_g) = g.learning_constants();
        let tr = 2.0 + 50.0 / 3.0;
        let det = 2.0 * 50.0 / 3.0 - 25.0;
        let disc = (tr * tr - 4.0f64 * det).sqrt();
        assert_abs_diff_eq!(l_g, (tr + disc) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mu_g, (tr - disc) / 2.0, epsilon = 1e-12);
        assert!(mu_g > 0.0 && mu_g <= l_g);
    }

    #[test]
    fn learning_oracle_is_unbiased() {
        let g = paper_instance(2);
        let i = PlayerId(5);
        let theta: Vec<f64> = g
            .theta_true(i)
            .iter()
            .enumerate()
            .map(|(k, v)| v + if k % 2 == 0 { 0.7 } else { -0.05 })
            .collect();
        let exact = g.learning_gradient(i, &theta);
        let mut rng = StreamFactory::from_seed(4).stream("learning", 0);
        let n = 100_000;
        let dim = theta.len();
        let mut sum = vec![0.0; dim];
        let mut sumsq = vec![0.0; dim];
        let mut out = vec![0.0; dim];
        for _ in 0..n {
            g.sample_learning_gradient_into(i, &theta, &mut out, &mut rng);
            for d in 0..dim {
                sum[d] += out[d];
                sumsq[d] += out[d] * out[d];
            }
        }
        for d in 0..dim {
            let mean = sum[d] / n as f64;
            let var = (sumsq[d] / n as f64 - mean * mean).max(0.0);
            let se = (var / n as f64).sqrt();
            assert!(
                (mean - exact[d]).abs() <= 3.5 * se + 1e-9,
                "coord {d}: mean {mean} vs exact {}",
                exact[d]
            );
        }
    }

    #[test]
    fn learning_gradient_matches_finite_differences_of_objective() {
        let g = paper_instance(6);
        let i = PlayerId(9);
        let theta: Vec<f64> =
            g.theta_true(i).iter().enumerate().map(|(k, v)| v + 0.1 * (k as f64 + 1.0)).collect();
        let grad = g.learning_gradient(i, &theta);
        for d in 0..theta.len() {
            let h = 1e-6;
            let mut tp = theta.clone();
            tp[d] += h;
            let mut tm = theta.clone();
            tm[d] -= h;
            let fd = (g.learning_objective(i, &tp) - g.learning_objective(i, &tm)) / (2.0 * h);
            assert!((grad[d] - fd).abs() < 1e-5, "coord {d}: {} vs {fd}", grad[d]);
        }
    }

    #[test]
    fn least_squares_identifies_the_true_parameters() {
        // Solving the 2x2 normal equations on a large observed sample
        // recovers (a*, b*) for every market of the firm.
        let g = paper_instance(7);
        let i = PlayerId(4);
        let mut rng = StreamFactory::from_seed(12).stream("fit", 0);
        let n = 1_000_000usize;
        for (p, &j) in g.firm_market_list(i).iter().enumerate() {
            let _ = p;
            let (lo, hi) = g.sales_range;
            let ph = g.price_noise_half[j];
            let (mut s1, mut s2, mut sp, mut ssp) = (0.0, 0.0, 0.0, 0.0);
            for _ in 0..n {
                let s: f64 = rng.gen_range(lo..hi);
                let zeta = if ph > 0.0 { rng.gen_range(-ph..ph) } else { 0.0 };
                let price = g.a_true[j] + zeta - g.b_true[j] * s;
                s1 += s;
                s2 += s * s;
                sp += price;
                ssp += s * price;
            }
            let nf = n as f64;
            // Fit price = alpha + beta s; then a = alpha, b = -beta.
            let beta = (ssp / nf - (s1 / nf) * (sp / nf)) / (s2 / nf - (s1 / nf).powi(2));
            let alpha = sp / nf - beta * s1 / nf;
            let sigma = ph / 3.0f64.sqrt();
            let se_beta = sigma / ((s2 / nf - (s1 / nf).powi(2)) * nf).sqrt();
            assert!((-beta - g.b_true[j]).abs() <= 3.0 * se_beta + 1e-9);
            assert!((alpha - g.a_true[j]).abs() <= 3.0 * se_beta * (s2 / nf).sqrt() + 1e-9);
        }
    }

    #[test]
    fn oracle_mean_matches_exact_gradient() {
        let g = paper_instance(11);
        let mut rng = StreamFactory::from_seed(13).stream("oracle", 0);
        let vals: Vec<f64> = (0..27).map(|_| rng.gen_range(0.0..3.0)).collect();
        let x = StrategyProfile::new(g.layout(), vals).unwrap();
        let i = PlayerId(7);
        let exact = exact_gradient(&g, i, &x).unwrap();
        let dim = exact.len();
        let n = 100_000;
        let mut sum = vec![0.0; dim];
        let mut sumsq = vec![0.0; dim];
        let mut out = vec![0.0; dim];
        let mut norm2 = 0.0;
        for _ in 0..n {
            g.sample_gradient_into(i, &x, &mut out, &mut rng).unwrap();
            for d in 0..dim {
                sum[d] += out[d];
                sumsq[d] += out[d] * out[d];
            }
            norm2 += out.iter().map(|v| v * v).sum::<f64>();
        }
        for d in 0..dim {
            let mean = sum[d] / n as f64;
            let var = (sumsq[d] / n as f64 - mean * mean).max(0.0);
            let se = (var / n as f64).sqrt();
            assert!((mean - exact[d]).abs() <= 3.5 * se + 1e-9);
        }
        assert!(norm2 / n as f64 <= g.grad_bound().powi(2));
    }

    #[test]
    fn invalid_networks_rejected() {
        let mut cfg = CournotConfig::paper_default();
        cfg.firm_markets[0] = vec![9];
        assert!(make_cournot(&cfg, &StreamFactory::from_seed(0)).is_err());
        let mut cfg2 = CournotConfig::paper_default();
        cfg2.firm_markets[2] = vec![];
        assert!(make_cournot(&cfg2, &StreamFactory::from_seed(0)).is_err());
    }
}
