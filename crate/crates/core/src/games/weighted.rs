//! Weighted-potential wrapper: rescales each player's objective by `1/w_i`
//! so the base potential satisfies the weighted increment identity
//! `P(x_i, x_-i) - P(x_i', x_-i) = w_i (f_i(x_i, x_-i) - f_i(x_i', x_-i))`.

use std::sync::Arc;

use rand::RngCore;

use crate::error::{CoreError, Result};
use crate::model::{BlockLayout, Game, PlayerId, StrategyProfile};
use crate::sets::FeasibleSet;

pub struct WeightedGame {
    inner: Arc<dyn Game>,
    weights: Vec<f64>,
    max_inv_w: f64,
}

pub fn make_weighted(inner: Arc<dyn Game>, weights: Vec<f64>) -> Result<WeightedGame> {
    if weights.len() != inner.player_count() {
        return Err(CoreError::Dimension {
            context: "weight vector",
            expected: inner.player_count(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(CoreError::invalid("weights must be strictly positive"));
    }
    let max_inv_w = weights.iter().map(|w| 1.0 / w).fold(0.0, f64::max);
    Ok(WeightedGame { inner, weights, max_inv_w })
}

impl WeightedGame {
    fn inv_w(&self, i: PlayerId) -> f64 {
        1.0 / self.weights[i.0]
    }
}

impl Game for WeightedGame {
    fn player_count(&self) -> usize {
        self.inner.player_count()
    }

    fn layout(&self) -> Arc<BlockLayout> {
        self.inner.layout()
    }

    fn strategy_set(&self, i: PlayerId) -> FeasibleSet {
        self.inner.strategy_set(i)
    }

    fn effective_set(&self, i: PlayerId, current: &StrategyProfile) -> Result<FeasibleSet> {
        self.inner.effective_set(i, current)
    }

    fn is_generalized(&self) -> bool {
        self.inner.is_generalized()
    }

    fn joint_set(&self) -> Result<FeasibleSet> {
        self.inner.joint_set()
    }

    fn sample_gradient_into(
        &self,
        i: PlayerId,
        view: &StrategyProfile,
        out: &mut [f64],
        rng: &mut dyn RngCore,
    ) -> Result<()> {
        self.inner.sample_gradient_into(i, view, out, rng)?;
        let s = self.inv_w(i);
        out.iter_mut().for_each(|v| *v *= s);
        Ok(())
    }

    fn exact_gradient_into(&self, i: PlayerId, x: &StrategyProfile, out: &mut [f64]) -> Result<()> {
        self.inner.exact_gradient_into(i, x, out)?;
        let s = self.inv_w(i);
        out.iter_mut().for_each(|v| *v *= s);
        Ok(())
    }

    fn has_exact_gradient(&self) -> bool {
        self.inner.has_exact_gradient()
    }

    fn objective(&self, i: PlayerId, x: &StrategyProfile) -> Option<f64> {
        self.inner.objective(i, x).map(|f| f * self.inv_w(i))
    }

    /// The potential is the base game's, unchanged; only the objectives are
    /// rescaled.
    fn potential(&self, x: &StrategyProfile) -> Result<f64> {
        self.inner.potential(x)
    }

    fn has_potential(&self) -> bool {
        self.inner.has_potential()
    }

    fn lipschitz(&self, i: PlayerId) -> f64 {
        self.inner.lipschitz(i) * self.inv_w(i)
    }

    fn strong_convexity(&self, i: PlayerId) -> Option<f64> {
        self.inner.strong_convexity(i).map(|m| m * self.inv_w(i))
    }

    fn weight(&self, i: PlayerId) -> f64 {
        self.weights[i.0]
    }

    fn grad_bound(&self) -> f64 {
        self.inner.grad_bound() * self.max_inv_w
    }

    fn closed_form_prox(
        &self,
        i: PlayerId,
        view: &StrategyProfile,
        mu: f64,
        anchor: &[f64],
    ) -> Option<Vec<f64>> {
        // argmin of f_i/w_i + (mu/2)|.|^2 equals argmin of f_i + (w_i mu/2)|.|^2.
        self.inner.closed_form_prox(i, view, mu * self.weights[i.0], anchor)
    }
}
