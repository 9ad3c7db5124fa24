//! CSV export. All numeric fields carry 17 significant digits so reruns can
//! be diffed byte-for-byte; absent metrics are empty fields; line endings are
//! LF.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};

use potential_nash::metrics::MeanSeries;
use potential_nash::trace::RunTrace;

/// Full-precision decimal rendering (17 significant digits).
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_float(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

/// Writes one replication trace. Column order is fixed:
/// `k,player,gap,dist_to_ref,theta_err_max,grad_steps_cum,comm_cum` followed
/// by one `x<j>` column per coordinate when snapshots are enabled.
pub fn write_trace_csv(path: &Path, trace: &RunTrace, dims: usize) -> Result<()> {
    let file = File::create(path).with_context(|| format!("create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    let snapshots = trace.rows.iter().any(|r| r.x.is_some());
    let mut header =
        String::from("k,player,gap,dist_to_ref,theta_err_max,grad_steps_cum,comm_cum");
    if snapshots {
        for j in 0..dims {
            header.push_str(&format!(",x{j}"));
        }
    }
    writeln!(w, "{header}")?;
    for row in &trace.rows {
        let player = row.player.map(|p| p.to_string()).unwrap_or_default();
        let mut line = format!(
            "{},{},{},{},{},{},{}",
            row.k,
            player,
            opt_float(row.gap),
            opt_float(row.dist_to_ref),
            opt_float(row.theta_err_max),
            row.grad_steps_cum,
            row.comm_cum
        );
        if snapshots {
            match &row.x {
                Some(x) => {
                    for v in x {
                        line.push(',');
                        line.push_str(&fmt_float(*v));
                    }
                }
                None => line.push_str(&",".repeat(dims)),
            }
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Pointwise replication mean and standard error of one metric column.
pub fn write_mean_csv(path: &Path, name: &str, series: &MeanSeries) -> Result<()> {
    let file = File::create(path).with_context(|| format!("create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "k,mean_{name},stderr_{name}")?;
    for ((k, m), s) in series.ks.iter().zip(&series.mean).zip(&series.stderr) {
        writeln!(w, "{},{},{}", k, fmt_float(*m), fmt_float(*s))?;
    }
    w.flush()?;
    Ok(())
}

/// One line per replication with its final metrics.
pub struct SummaryRow {
    pub replication: u64,
    pub seed: u64,
    pub final_k: u64,
    pub final_gap: Option<f64>,
    pub final_dist: Option<f64>,
    pub final_theta_err: Option<f64>,
    pub grad_steps: u64,
    pub comm: u64,
    pub audit_violations: u64,
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(
        w,
        "replication,seed,final_k,final_gap,final_dist,final_theta_err,grad_steps,comm,audit_violations"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.replication,
            r.seed,
            r.final_k,
            opt_float(r.final_gap),
            opt_float(r.final_dist),
            opt_float(r.final_theta_err),
            r.grad_steps,
            r.comm,
            r.audit_violations
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_is_17_significant_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
        // Round-trips exactly.
        let v = std::f64::consts::PI * 1e-7;
        let s = fmt_float(v);
        assert_eq!(s.parse::<f64>().unwrap(), v);
    }
}
