//! Solvers and experiment harness for stochastic potential Nash games.
//!
//! The crate implements asynchronous best-response-style schemes in which a
//! randomly activated player refreshes one strategy block per iteration from
//! possibly stale rival information:
//!
//! * inexact proximal best response, with the inner solve done by projected
//!   stochastic approximation on a local-counter step budget;
//! * a projected gradient-response variant with growing mini-batches;
//! * pure best response for strongly convex player problems (delay-free);
//! * proximal best response with simultaneous stochastic learning of a
//!   misspecified payoff parameter;
//! * a single-sample stochastic-gradient baseline used for communication
//!   overhead comparisons.
//!
//! Shipped game instances: a quadratic two-player toy, a capacitated network
//! congestion game, and a networked Cournot market with unknown price
//! parameters. Runs are deterministic per seed and export CSV traces through
//! the companion CLI crate.

pub mod engine;
pub mod error;
pub mod games;
pub mod inner;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod schedule;
pub mod sets;
pub mod trace;

pub use engine::{Algorithm, BetaRule, NoiseInjection, RunConfig, ThetaInit};
pub use error::{CoreError, Result};
pub use model::{Game, MisspecifiedGame, PlayerId, StrategyProfile};
pub use rng::StreamFactory;
pub use sets::FeasibleSet;
pub use trace::RunTrace;
