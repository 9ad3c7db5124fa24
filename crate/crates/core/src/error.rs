use thiserror::Error;

/// Errors shared across the solver library.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unsupported operation: {what}")]
    Unsupported { what: &'static str },

    #[error("invalid input: {what}")]
    Invalid { what: String },

    /// The coupled feasible interval of a player collapsed below zero, i.e.
    /// the rival profile already violates a shared capacity.
    #[error("infeasible rival profile for player {player}: upper bound {upper}")]
    InfeasibleRivals { player: usize, upper: f64 },

    #[error("linear program failed: {what}")]
    Lp { what: String },

    #[error("replication traces do not share a logging grid")]
    GridMismatch,
}

impl CoreError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CoreError::Invalid { what: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
