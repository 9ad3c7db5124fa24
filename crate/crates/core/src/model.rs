//! Game abstraction: players, strategy blocks, stochastic first-order
//! oracles, and potential-function access.
//!
//! A [`Game`] is immutable after construction and safe to share across
//! threads; oracle calls are pure given an explicit RNG stream, so all
//! mutation lives in caller-owned state.

use std::sync::Arc;

use rand::RngCore;

use crate::error::{CoreError, Result};
use crate::sets::FeasibleSet;

/// Index of a player, in `[0, N)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlayerId(pub usize);

impl std::fmt::Display for PlayerId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Block structure of the concatenated decision vector `x = (x_1, ..., x_N)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

impl BlockLayout {
    pub fn new(dims: Vec<usize>) -> Result<Arc<BlockLayout>> {
        if dims.is_empty() {
            return Err(CoreError::invalid("a game needs at least one player"));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(CoreError::invalid("zero-dimensional strategy block"));
        }
        let mut offsets = Vec::with_capacity(dims.len());
        let mut total = 0;
        for &d in &dims {
            offsets.push(total);
            total += d;
        }
        Ok(Arc::new(BlockLayout { dims, offsets, total }))
    }

    /// Layout of `n` scalar players.
    pub fn scalar(n: usize) -> Result<Arc<BlockLayout>> {
        BlockLayout::new(vec![1; n])
    }

    pub fn players(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self, i: PlayerId) -> usize {
        self.dims[i.0]
    }

    pub fn total_dim(&self) -> usize {
        self.total
    }

    pub fn range(&self, i: PlayerId) -> std::ops::Range<usize> {
        let o = self.offsets[i.0];
        o..o + self.dims[i.0]
    }
}

/// The concatenated strategy profile with per-player block boundaries.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyProfile {
    layout: Arc<BlockLayout>,
    data: Vec<f64>,
}

impl StrategyProfile {
    pub fn new(layout: Arc<BlockLayout>, data: Vec<f64>) -> Result<Self> {
        if data.len() != layout.total_dim() {
            return Err(CoreError::Dimension {
                context: "StrategyProfile::new",
                expected: layout.total_dim(),
                got: data.len(),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(CoreError::invalid("non-finite entry in strategy profile"));
        }
        Ok(StrategyProfile { layout, data })
    }

    pub fn zeros(layout: Arc<BlockLayout>) -> Self {
        let n = layout.total_dim();
        StrategyProfile { layout, data: vec![0.0; n] }
    }

    pub fn layout(&self) -> &Arc<BlockLayout> {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn block(&self, i: PlayerId) -> &[f64] {
        &self.data[self.layout.range(i)]
    }

    pub fn block_mut(&mut self, i: PlayerId) -> &mut [f64] {
        let r = self.layout.range(i);
        &mut self.data[r]
    }

    pub fn set_block(&mut self, i: PlayerId, v: &[f64]) {
        self.block_mut(i).copy_from_slice(v);
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// A stochastic potential game: per-player strategy sets, a sampled
/// first-order oracle, and (optionally) closed-form expected quantities.
///
/// `lipschitz` and `grad_bound` are analytic declarations made by each game
/// instance; they drive step-size thresholds and diagnostics, never control
/// flow.
pub trait Game: Send + Sync {
    fn player_count(&self) -> usize;

    fn layout(&self) -> Arc<BlockLayout>;

    /// Player's standalone strategy set `X_i` (box, interval, or orthant).
    fn strategy_set(&self, i: PlayerId) -> FeasibleSet;

    /// Effective feasible set given the current rival profile. Coincides with
    /// [`Game::strategy_set`] unless the game has coupled constraints, in
    /// which case it may fail when the rivals already violate a shared
    /// capacity.
    fn effective_set(&self, i: PlayerId, current: &StrategyProfile) -> Result<FeasibleSet> {
        let _ = current;
        Ok(self.strategy_set(i))
    }

    /// Whether feasible sets are coupled across players.
    fn is_generalized(&self) -> bool {
        false
    }

    /// Joint set `X` used by gap evaluation (the product set, or the shared
    /// polytope for coupled games).
    fn joint_set(&self) -> Result<FeasibleSet>;

    /// One draw of the stochastic gradient of player `i`'s expected objective
    /// at `view`, written into `out`.
    fn sample_gradient_into(
        &self,
        i: PlayerId,
        view: &StrategyProfile,
        out: &mut [f64],
        rng: &mut dyn RngCore,
    ) -> Result<()>;

    /// Gradient of the expected objective, when available in closed form.
    fn exact_gradient_into(&self, i: PlayerId, x: &StrategyProfile, out: &mut [f64]) -> Result<()> {
        let _ = (i, x, out);
        Err(CoreError::Unsupported { what: "exact gradient not declared for this game" })
    }

    fn has_exact_gradient(&self) -> bool {
        false
    }

    /// Expected objective value `f_i(x)`, when available in closed form.
    fn objective(&self, i: PlayerId, x: &StrategyProfile) -> Option<f64> {
        let _ = (i, x);
        None
    }

    /// Potential value `P(x)`.
    fn potential(&self, x: &StrategyProfile) -> Result<f64> {
        let _ = x;
        Err(CoreError::Unsupported { what: "no potential declared for this game" })
    }

    fn has_potential(&self) -> bool {
        false
    }

    /// Declared Lipschitz constant of `x -> grad_i f_i(x)`.
    fn lipschitz(&self, i: PlayerId) -> f64;

    /// Strong-convexity modulus of `f_i` in its own block, when declared.
    fn strong_convexity(&self, i: PlayerId) -> Option<f64> {
        let _ = i;
        None
    }

    /// Weight `w_i` of a weighted potential game; 1 otherwise.
    fn weight(&self, i: PlayerId) -> f64 {
        let _ = i;
        1.0
    }

    /// Declared second-moment bound `M` on the sampled gradient norm.
    fn grad_bound(&self) -> f64;

    /// Closed-form proximal best response, when the game has one. `mu = 0`
    /// yields the plain best response.
    fn closed_form_prox(
        &self,
        i: PlayerId,
        view: &StrategyProfile,
        mu: f64,
        anchor: &[f64],
    ) -> Option<Vec<f64>> {
        let _ = (i, view, mu, anchor);
        None
    }

    fn check_view(&self, view: &StrategyProfile) -> Result<()> {
        let expected = self.layout().total_dim();
        if view.dim() != expected {
            return Err(CoreError::Dimension { context: "oracle view", expected, got: view.dim() });
        }
        Ok(())
    }
}

/// A game whose objectives depend on an unknown parameter, itself the
/// solution of a strongly convex stochastic program learned online.
///
/// The [`Game`] supertrait methods evaluate everything at the true parameter
/// (used by metrics, reference runs, and data generation); algorithms only
/// touch the belief-parameterized methods below.
pub trait MisspecifiedGame: Game {
    /// Dimension of player `i`'s belief vector.
    fn theta_dim(&self, i: PlayerId) -> usize;

    /// Feasible set of player `i`'s belief.
    fn theta_set(&self, i: PlayerId) -> FeasibleSet;

    /// True parameter restricted to player `i`'s coordinates. Hidden from the
    /// algorithms; consumed only by metrics and learning-data generation.
    fn theta_true(&self, i: PlayerId) -> Vec<f64>;

    /// Default initialization box for beliefs (inside the feasible set).
    fn theta_prior_box(&self, i: PlayerId) -> (Vec<f64>, Vec<f64>);

    /// Stochastic gradient of the expected objective at belief `theta_i`.
    fn sample_gradient_at_into(
        &self,
        i: PlayerId,
        view: &StrategyProfile,
        theta_i: &[f64],
        out: &mut [f64],
        rng: &mut dyn RngCore,
    ) -> Result<()>;

    /// Gradient of the expected objective at belief `theta_i`.
    fn exact_gradient_at(&self, i: PlayerId, x: &StrategyProfile, theta_i: &[f64]) -> Vec<f64>;

    /// One sampled gradient of the learning objective `g` at `theta_i`.
    fn sample_learning_gradient_into(
        &self,
        i: PlayerId,
        theta_i: &[f64],
        out: &mut [f64],
        rng: &mut dyn RngCore,
    );

    /// Exact learning objective (closed form).
    fn learning_objective(&self, i: PlayerId, theta_i: &[f64]) -> f64;

    /// Exact gradient of the learning objective.
    fn learning_gradient(&self, i: PlayerId, theta_i: &[f64]) -> Vec<f64>;

    /// `(mu_g, L_g)`: strong convexity and gradient Lipschitz constants of
    /// the learning objective.
    fn learning_constants(&self) -> (f64, f64);

    /// Lipschitz constant of `x -> grad_i f_i(x; theta*)`, uniform over players.
    fn lipschitz_x(&self) -> f64;
}

/// One draw of the stochastic gradient, as a fresh vector.
pub fn sample_gradient(
    game: &dyn Game,
    i: PlayerId,
    view: &StrategyProfile,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; game.layout().dim(i)];
    game.sample_gradient_into(i, view, &mut out, rng)?;
    if !out.iter().all(|v| v.is_finite()) {
        return Err(CoreError::invalid(format!("non-finite sampled gradient for player {}", i)));
    }
    Ok(out)
}

/// Gradient of the expected objective, as a fresh vector.
pub fn exact_gradient(game: &dyn Game, i: PlayerId, x: &StrategyProfile) -> Result<Vec<f64>> {
    let mut out = vec![0.0; game.layout().dim(i)];
    game.exact_gradient_into(i, x, &mut out)?;
    Ok(out)
}

/// Potential value; errors when the game declares none.
pub fn potential_value(game: &dyn Game, x: &StrategyProfile) -> Result<f64> {
    game.potential(x)
}
