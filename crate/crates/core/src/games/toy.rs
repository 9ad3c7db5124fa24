//! Two-player quadratic toy game on the unit square.
//!
//! Both players share the same objective
//! `P(x) = (x1 + x2 - 1)^2 + x1^2 + x2^2`, so the game is an
//! identical-interest potential game with unique equilibrium `(1/3, 1/3)`.
//! Every quantity of interest has a closed form, which makes this instance
//! the oracle-verifiable fixture for the solver stack: the proximal best
//! response is `T_i(x) = clamp((2 (1 - x_{-i}) + mu x_i) / (4 + mu), 0, 1)`.

use std::sync::Arc;

use rand::RngCore;
use rand_distr::{Distribution, Normal};

use crate::error::{CoreError, Result};
use crate::model::{BlockLayout, Game, PlayerId, StrategyProfile};
use crate::sets::FeasibleSet;

#[derive(Debug)]
pub struct QuadraticToyGame {
    layout: Arc<BlockLayout>,
    noise: Option<Normal<f64>>,
    sigma: f64,
}

/// Unique Nash equilibrium of the toy game.
pub const TOY_NE: [f64; 2] = [1.0 / 3.0, 1.0 / 3.0];

pub fn make_toy(sigma: f64) -> Result<QuadraticToyGame> {
    if sigma < 0.0 {
        return Err(CoreError::invalid("toy noise level must be nonnegative"));
    }
    let noise = if sigma > 0.0 {
        Some(Normal::new(0.0, sigma).expect("valid normal"))
    } else {
        None
    };
    Ok(QuadraticToyGame { layout: BlockLayout::scalar(2)?, noise, sigma })
}

impl QuadraticToyGame {
    fn grad(&self, i: PlayerId, x: &StrategyProfile) -> f64 {
        let own = x.block(i)[0];
        let other = x.block(PlayerId(1 - i.0))[0];
        2.0 * (own + other - 1.0) + 2.0 * own
    }

    /// Closed-form proximal best response for tests and exact-inner runs.
    pub fn prox_map(&self, i: PlayerId, view: &StrategyProfile, mu: f64, anchor: f64) -> f64 {
        let other = view.block(PlayerId(1 - i.0))[0];
        ((2.0 * (1.0 - other) + mu * anchor) / (4.0 + mu)).clamp(0.0, 1.0)
    }
}

impl Game for QuadraticToyGame {
    fn player_count(&self) -> usize {
        2
    }

    fn layout(&self) -> Arc<BlockLayout> {
        self.layout.clone()
    }

    fn strategy_set(&self, _i: PlayerId) -> FeasibleSet {
        FeasibleSet::Interval { lo: 0.0, hi: 1.0 }
    }

    fn joint_set(&self) -> Result<FeasibleSet> {
        FeasibleSet::bounded_box(vec![0.0, 0.0], vec![1.0, 1.0])
    }

    fn sample_gradient_into(
        &self,
        i: PlayerId,
        view: &StrategyProfile,
        out: &mut [f64],
        rng: &mut dyn RngCore,
    ) -> Result<()> {
        self.check_view(view)?;
        let mut g = self.grad(i, view);
        if let Some(n) = &self.noise {
            g += n.sample(rng);
        }
        out[0] = g;
        Ok(())
    }

    fn exact_gradient_into(&self, i: PlayerId, x: &StrategyProfile, out: &mut [f64]) -> Result<()> {
        self.check_view(x)?;
        out[0] = self.grad(i, x);
        Ok(())
    }

    fn has_exact_gradient(&self) -> bool {
        true
    }

    fn objective(&self, _i: PlayerId, x: &StrategyProfile) -> Option<f64> {
        self.potential(x).ok()
    }

    fn potential(&self, x: &StrategyProfile) -> Result<f64> {
        self.check_view(x)?;
        let [x1, x2] = [x.as_slice()[0], x.as_slice()[1]];
        Ok((x1 + x2 - 1.0) * (x1 + x2 - 1.0) + x1 * x1 + x2 * x2)
    }

    fn has_potential(&self) -> bool {
        true
    }

    fn lipschitz(&self, _i: PlayerId) -> f64 {
        4.0
    }

    fn strong_convexity(&self, _i: PlayerId) -> Option<f64> {
        Some(4.0)
    }

    fn grad_bound(&self) -> f64 {
        // sup |grad_i P| over the unit square is 4; additive noise adds its
        // variance to the second moment.
        (16.0 + self.sigma * self.sigma).sqrt()
    }

    fn closed_form_prox(
        &self,
        i: PlayerId,
        view: &StrategyProfile,
        mu: f64,
        anchor: &[f64],
    ) -> Option<Vec<f64>> {
        Some(vec![self.prox_map(i, view, mu, anchor[0])])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{exact_gradient, potential_value, sample_gradient};
    use crate::rng::StreamFactory;
    use approx::assert_abs_diff_eq;

    fn profile(x1: f64, x2: f64) -> StrategyProfile {
        let g = make_toy(0.0).unwrap();
        StrategyProfile::new(g.layout(), vec![x1, x2]).unwrap()
    }

    #[test]
    fn gradient_at_origin() {
        let g = make_toy(0.0).unwrap();
        let mut rng = StreamFactory::from_seed(1).stream("oracle", 0);
        let grad = sample_gradient(&g, PlayerId(0), &profile(0.0, 0.0), &mut rng).unwrap();
        assert_abs_diff_eq!(grad[0], -2.0);
    }

    #[test]
    fn potential_at_equilibrium() {
        let g = make_toy(0.0).unwrap();
        let p = potential_value(&g, &profile(TOY_NE[0], TOY_NE[1])).unwrap();
        assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn gradient_vanishes_at_equilibrium() {
        let g = make_toy(0.0).unwrap();
        let x = profile(TOY_NE[0], TOY_NE[1]);
        for i in 0..2 {
            let grad = exact_gradient(&g, PlayerId(i), &x).unwrap();
            assert_abs_diff_eq!(grad[0], 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn prox_map_examples() {
        let g = make_toy(0.0).unwrap();
        let x = profile(0.0, 0.0);
        assert_abs_diff_eq!(g.prox_map(PlayerId(0), &x, 1.0, 0.0), 0.4);
        // The equilibrium is a fixed point for any mu.
        let ne = profile(TOY_NE[0], TOY_NE[1]);
        for mu in [0.0, 0.5, 1.0, 5.0] {
            assert_abs_diff_eq!(
                g.prox_map(PlayerId(0), &ne, mu, TOY_NE[0]),
                TOY_NE[0],
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn identical_interest_identity() {
        // P(x1', x2) - P(x1, x2) == f_1(x1', x2) - f_1(x1, x2), here exactly.
        let g = make_toy(0.0).unwrap();
        let mut rng = StreamFactory::from_seed(9).stream("pairs", 0);
        use rand::Rng;
        for _ in 0..100 {
            let x = profile(rng.gen::<f64>(), rng.gen::<f64>());
            let x1p: f64 = rng.gen();
            let mut xp = x.clone();
            xp.set_block(PlayerId(0), &[x1p]);
            let dp = potential_value(&g, &xp).unwrap() - potential_value(&g, &x).unwrap();
            let df = g.objective(PlayerId(0), &xp).unwrap() - g.objective(PlayerId(0), &x).unwrap();
            assert!((dp - df).abs() <= 1e-12);
        }
    }

    #[test]
    fn negative_sigma_rejected() {
        assert!(make_toy(-0.1).is_err());
    }

    #[test]
    fn dimension_mismatch_is_hard_error() {
        let g = make_toy(0.0).unwrap();
        let other = StrategyProfile::zeros(BlockLayout::scalar(3).unwrap());
        let mut rng = StreamFactory::from_seed(1).stream("oracle", 0);
        let mut out = [0.0];
        assert!(matches!(
            g.sample_gradient_into(PlayerId(0), &other, &mut out, &mut rng),
            Err(CoreError::Dimension { .. })
        ));
    }
}
