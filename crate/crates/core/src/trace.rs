//! Time-indexed run records: iterates, gap values, belief errors, and the
//! gradient-step / communication counters that feed CSV export and the
//! cross-replication statistics.

use crate::error::{CoreError, Result};

/// One logged point of a run. Counters are exact cumulative values at the
/// row's iteration; expensive metrics are present only on the logging grid.
#[derive(Clone, Debug)]
pub struct TraceRow {
    /// Iteration index of the recorded state `x(k)`.
    pub k: u64,
    /// Player whose update produced this state; `None` on the initial row.
    pub player: Option<usize>,
    /// Delays sampled for that update.
    pub delays: Option<Vec<u32>>,
    pub gap: Option<f64>,
    pub dist_to_ref: Option<f64>,
    pub theta_err_max: Option<f64>,
    pub grad_steps_cum: u64,
    pub comm_cum: u64,
    /// Thinned snapshot of the full profile.
    pub x: Option<Vec<f64>>,
}

/// Step-size threshold report logged with every run.
#[derive(Clone, Debug, Default)]
pub struct ThresholdReport {
    /// Per-player sufficient proximal weights for the delayed scheme.
    pub prox_br: Vec<f64>,
    /// Weighted-game variant (equals `prox_br` under unit weights).
    pub weighted: Vec<f64>,
    /// Uniform threshold for the learning scheme, when applicable.
    pub learning: Option<f64>,
    /// Players whose configured weight sits below the sufficient threshold.
    pub below: Vec<usize>,
}

/// In-loop audit tallies; every violation is also a logic error.
#[derive(Clone, Debug, Default)]
pub struct AuditSummary {
    pub enabled: bool,
    pub iterations: u64,
    pub violations: u64,
    pub max_delay_seen: u32,
}

#[derive(Clone, Debug)]
pub struct RunMeta {
    pub algorithm: String,
    pub seed: u64,
    pub players: usize,
    pub horizon: u64,
    pub mu: Vec<f64>,
    pub tau: u32,
    pub thresholds: ThresholdReport,
    pub audit: AuditSummary,
    /// Per-player totals of committed movement, split into ten equal horizon
    /// buckets; used for trajectory-stabilization diagnostics.
    pub movement: Vec<[f64; 10]>,
    /// Total sampled gradients drawn for strategy updates.
    pub grad_steps: u64,
    /// Total rival-information retrievals.
    pub comm_events: u64,
    /// Capped inner-step events (schedule hit `max_inner_steps`).
    pub schedule_caps_hit: u64,
    pub final_x: Vec<f64>,
    pub final_theta: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug)]
pub struct RunTrace {
    pub meta: RunMeta,
    pub rows: Vec<TraceRow>,
}

/// Metric columns addressable by cross-replication statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Column {
    Gap,
    DistToRef,
    ThetaErrMax,
    GradSteps,
    Comm,
}

impl Column {
    pub fn get(&self, row: &TraceRow) -> Option<f64> {
        match self {
            Column::Gap => row.gap,
            Column::DistToRef => row.dist_to_ref,
            Column::ThetaErrMax => row.theta_err_max,
            Column::GradSteps => Some(row.grad_steps_cum as f64),
            Column::Comm => Some(row.comm_cum as f64),
        }
    }
}

impl RunTrace {
    /// Rows where the chosen column is populated, as `(k, value)` pairs.
    pub fn series(&self, column: Column) -> Vec<(u64, f64)> {
        self.rows.iter().filter_map(|r| column.get(r).map(|v| (r.k, v))).collect()
    }

    pub fn validate_monotone(&self) -> Result<()> {
        for w in self.rows.windows(2) {
            if w[1].k <= w[0].k {
                return Err(CoreError::invalid("trace rows not strictly increasing in k"));
            }
            if w[1].grad_steps_cum < w[0].grad_steps_cum || w[1].comm_cum < w[0].comm_cum {
                return Err(CoreError::invalid("trace counters decreased"));
            }
        }
        Ok(())
    }
}
