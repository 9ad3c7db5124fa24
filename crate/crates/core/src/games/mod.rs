//! Fully specified game instances with closed-form gradients, potentials,
//! and analytic constants, plus the weighted-potential wrapper.

pub mod congestion;
pub mod cournot;
pub mod toy;
pub mod weighted;

pub use congestion::{make_congestion, CongestionConfig, CongestionGame};
pub use cournot::{make_cournot, CournotConfig, CournotGame};
pub use toy::{make_toy, QuadraticToyGame, TOY_NE};
pub use weighted::{make_weighted, WeightedGame};
