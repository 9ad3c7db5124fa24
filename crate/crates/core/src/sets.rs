//! Projections and linear-minimization oracles for the strategy and
//! parameter sets in play: boxes, intervals, the nonnegative orthant, and
//! small polytopes `{x : Ax <= c, lo <= x <= hi}`.
//!
//! Polytopes only ever appear inside the gap function's inner linear
//! minimization, solved by a dense two-phase simplex with Bland's rule.
//! Projection onto a polytope is deliberately unsupported: no algorithm in
//! this crate needs it.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::{PlayerId, StrategyProfile};

const EPS: f64 = 1e-9;

/// Dense inequality system `A x <= c` intersected with box bounds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Polytope {
    pub a: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Polytope {
    /// Validates shapes and bounds and checks nonemptiness with one LP
    /// feasibility solve.
    pub fn new(a: Vec<Vec<f64>>, c: Vec<f64>, lo: Vec<f64>, hi: Vec<f64>) -> Result<Polytope> {
        let n = lo.len();
        if hi.len() != n {
            return Err(CoreError::Dimension { context: "Polytope bounds", expected: n, got: hi.len() });
        }
        if a.len() != c.len() {
            return Err(CoreError::Dimension { context: "Polytope rows", expected: a.len(), got: c.len() });
        }
        for row in &a {
            if row.len() != n {
                return Err(CoreError::Dimension { context: "Polytope row", expected: n, got: row.len() });
            }
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(CoreError::invalid("polytope bounds violate lo <= hi"));
        }
        let p = Polytope { a, c, lo, hi };
        if !p.is_feasible()? {
            return Err(CoreError::invalid("empty polytope"));
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn is_feasible(&self) -> Result<bool> {
        match Simplex::solve(self, &vec![0.0; self.dim()]) {
            Ok(_) => Ok(true),
            Err(CoreError::Lp { what }) if what.contains("infeasible") => Ok(false),
            Err(e) => Err(e),
        }
    }
}

/// A closed convex feasible set.
#[derive(Clone, Debug)]
pub enum FeasibleSet {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Interval { lo: f64, hi: f64 },
    NonnegOrthant { dim: usize },
    Polytope(Polytope),
}

impl FeasibleSet {
    pub fn interval(lo: f64, hi: f64) -> Result<FeasibleSet> {
        if !(lo <= hi) {
            return Err(CoreError::invalid(format!("interval [{lo}, {hi}] is empty")));
        }
        Ok(FeasibleSet::Interval { lo, hi })
    }

    pub fn bounded_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<FeasibleSet> {
        if lo.len() != hi.len() {
            return Err(CoreError::Dimension { context: "box bounds", expected: lo.len(), got: hi.len() });
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(CoreError::invalid("box bounds violate lo <= hi"));
        }
        Ok(FeasibleSet::Box { lo, hi })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Box { lo, .. } => lo.len(),
            FeasibleSet::Interval { .. } => 1,
            FeasibleSet::NonnegOrthant { dim } => *dim,
            FeasibleSet::Polytope(p) => p.dim(),
        }
    }

    fn check_dim(&self, got: usize, context: &'static str) -> Result<()> {
        if got != self.dim() {
            return Err(CoreError::Dimension { context, expected: self.dim(), got });
        }
        Ok(())
    }

    /// Euclidean projection, in place. Idempotent; leaves interior points
    /// untouched. Unsupported for polytopes.
    pub fn project_into(&self, v: &mut [f64]) -> Result<()> {
        self.check_dim(v.len(), "project")?;
        match self {
            FeasibleSet::Box { lo, hi } => {
                for ((x, l), h) in v.iter_mut().zip(lo).zip(hi) {
                    *x = x.clamp(*l, *h);
                }
            }
            FeasibleSet::Interval { lo, hi } => v[0] = v[0].clamp(*lo, *hi),
            FeasibleSet::NonnegOrthant { .. } => {
                for x in v.iter_mut() {
                    if *x < 0.0 {
                        *x = 0.0;
                    }
                }
            }
            FeasibleSet::Polytope(_) => {
                return Err(CoreError::Unsupported { what: "projection onto a polytope" })
            }
        }
        Ok(())
    }

    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = v.to_vec();
        self.project_into(&mut out)?;
        Ok(out)
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        if v.len() != self.dim() {
            return false;
        }
        match self {
            FeasibleSet::Box { lo, hi } => v
                .iter()
                .zip(lo)
                .zip(hi)
                .all(|((x, l), h)| *x >= l - tol && *x <= h + tol),
            FeasibleSet::Interval { lo, hi } => v[0] >= lo - tol && v[0] <= hi + tol,
            FeasibleSet::NonnegOrthant { .. } => v.iter().all(|x| *x >= -tol),
            FeasibleSet::Polytope(p) => {
                let in_box = v
                    .iter()
                    .zip(&p.lo)
                    .zip(&p.hi)
                    .all(|((x, l), h)| *x >= l - tol && *x <= h + tol);
                in_box
                    && p.a.iter().zip(&p.c).all(|(row, ci)| {
                        let lhs: f64 = row.iter().zip(v).map(|(a, x)| a * x).sum();
                        lhs <= ci + tol
                    })
            }
        }
    }

    /// Exact minimizer of `cost . y` over the set together with the minimum.
    ///
    /// Boxes and intervals resolve coordinatewise with ties broken toward the
    /// lower bound; polytopes go through the simplex. The orthant only admits
    /// nonnegative costs (anything else is unbounded).
    pub fn linear_minimize(&self, cost: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.check_dim(cost.len(), "linear_minimize")?;
        match self {
            FeasibleSet::Box { lo, hi } => {
                let mut arg = Vec::with_capacity(cost.len());
                let mut val = 0.0;
                for ((c, l), h) in cost.iter().zip(lo).zip(hi) {
                    let y = if *c > 0.0 { *l } else if *c < 0.0 { *h } else { *l };
                    arg.push(y);
                    val += c * y;
                }
                Ok((arg, val))
            }
            FeasibleSet::Interval { lo, hi } => {
                let y = if cost[0] > 0.0 { *lo } else if cost[0] < 0.0 { *hi } else { *lo };
                Ok((vec![y], cost[0] * y))
            }
            FeasibleSet::NonnegOrthant { dim } => {
                if cost.iter().any(|c| *c < 0.0) {
                    return Err(CoreError::Lp {
                        what: "linear program unbounded below on the nonnegative orthant".into(),
                    });
                }
                Ok((vec![0.0; *dim], 0.0))
            }
            FeasibleSet::Polytope(p) => Simplex::solve(p, cost),
        }
    }

    /// Diameter of the set; `None` when unbounded.
    pub fn diameter(&self) -> Option<f64> {
        match self {
            FeasibleSet::Box { lo, hi } => {
                Some(lo.iter().zip(hi).map(|(l, h)| (h - l) * (h - l)).sum::<f64>().sqrt())
            }
            FeasibleSet::Interval { lo, hi } => Some(hi - lo),
            FeasibleSet::NonnegOrthant { .. } => None,
            FeasibleSet::Polytope(p) => {
                Some(p.lo.iter().zip(&p.hi).map(|(l, h)| (h - l) * (h - l)).sum::<f64>().sqrt())
            }
        }
    }
}

/// A bounded linear program `min objective . y` over a polytope.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub set: Polytope,
}

impl LinearProgram {
    pub fn solve(&self) -> Result<(Vec<f64>, f64)> {
        Simplex::solve(&self.set, &self.objective)
    }
}

/// Dense two-phase tableau simplex with Bland's anti-cycling rule.
///
/// Variables are shifted by `lo` so everything is in standard `u >= 0` form;
/// upper bounds become explicit rows. Sizes here are tiny (n <= 13, m <= 12),
/// so a full dense tableau is the simplest correct choice.
struct Simplex {
    rows: usize,
    cols: usize,
    structural: usize,
    tab: Vec<Vec<f64>>, // rows x (cols + 1); last entry is the rhs
    basis: Vec<usize>,
    pivots: usize,
    pivot_cap: usize,
}

impl Simplex {
    fn solve(p: &Polytope, cost: &[f64]) -> Result<(Vec<f64>, f64)> {
        let n = p.dim();
        let m = p.a.len();
        let rows = m + n;
        // Columns: n structural + one slack per row; artificials appended later.
        let slack0 = n;
        let cols = n + rows;
        let mut tab = vec![vec![0.0; cols + 1]; rows];
        for (r, row) in p.a.iter().enumerate() {
            let mut rhs = p.c[r];
            for (j, &arj) in row.iter().enumerate() {
                tab[r][j] = arj;
                rhs -= arj * p.lo[j];
            }
            tab[r][slack0 + r] = 1.0;
            tab[r][cols] = rhs;
        }
        for j in 0..n {
            let r = m + j;
            tab[r][j] = 1.0;
            tab[r][slack0 + r] = 1.0;
            tab[r][cols] = p.hi[j] - p.lo[j];
        }

        let mut s = Simplex {
            rows,
            cols,
            structural: n,
            tab,
            basis: (slack0..slack0 + rows).collect(),
            pivots: 0,
            pivot_cap: 10 * (rows + cols),
        };
        s.run_two_phases(cost, p)
    }

    fn run_two_phases(&mut self, cost: &[f64], p: &Polytope) -> Result<(Vec<f64>, f64)> {
        // Phase I: negate infeasible rows and give each an artificial column.
        let mut artificials = Vec::new();
        for r in 0..self.rows {
            if self.tab[r][self.cols] < -EPS {
                for v in self.tab[r].iter_mut() {
                    *v = -*v;
                }
                let col = self.cols;
                self.cols += 1;
                for (rr, row) in self.tab.iter_mut().enumerate() {
                    row.insert(col, if rr == r { 1.0 } else { 0.0 });
                }
                self.basis[r] = col;
                artificials.push(col);
            }
        }
        let first_artificial = self.cols - artificials.len();
        if !artificials.is_empty() {
            let mut phase1 = vec![0.0; self.cols];
            for &c in &artificials {
                phase1[c] = 1.0;
            }
            let v = self.optimize(&phase1, self.cols)?;
            if v > 1e-7 {
                return Err(CoreError::Lp { what: "infeasible linear program".into() });
            }
            self.drive_out_artificials(first_artificial)?;
        }

        let mut phase2 = vec![0.0; self.cols];
        phase2[..self.structural].copy_from_slice(cost);
        self.optimize(&phase2, first_artificial)?;

        let mut u = vec![0.0; self.structural];
        for (r, &b) in self.basis.iter().enumerate() {
            if b < self.structural {
                u[b] = self.tab[r][self.cols];
            }
        }
        let y: Vec<f64> = u.iter().zip(&p.lo).map(|(ui, l)| ui + l).collect();
        let value = cost.iter().zip(&y).map(|(c, yi)| c * yi).sum();
        Ok((y, value))
    }

    /// Minimizes `cost . x` from the current basis; entering columns are
    /// restricted to `[0, col_limit)`. Returns the optimal objective value.
    fn optimize(&mut self, cost: &[f64], col_limit: usize) -> Result<f64> {
        // Reduced costs for the current basis.
        let mut z: Vec<f64> = cost.to_vec();
        let mut obj = 0.0;
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                obj += cb * self.tab[r][self.cols];
                for j in 0..self.cols {
                    z[j] -= cb * self.tab[r][j];
                }
            }
        }
        loop {
            // Bland: lowest-index column with a negative reduced cost.
            let Some(enter) = (0..col_limit).find(|&j| z[j] < -EPS) else {
                return Ok(obj);
            };
            // Ratio test; ties resolved toward the smallest basic index.
            let mut leave: Option<usize> = None;
            let mut best = f64::INFINITY;
            for r in 0..self.rows {
                let a = self.tab[r][enter];
                if a > EPS {
                    let ratio = self.tab[r][self.cols] / a;
                    let better = ratio < best - EPS
                        || (ratio < best + EPS
                            && leave.map_or(true, |l| self.basis[r] < self.basis[l]));
                    if better {
                        best = ratio;
                        leave = Some(r);
                    }
                }
            }
            let Some(leave) = leave else {
                return Err(CoreError::Lp { what: "unbounded linear program".into() });
            };
            self.pivots += 1;
            if self.pivots > self.pivot_cap {
                return Err(CoreError::Lp {
                    what: format!(
                        "pivot cap exceeded ({} pivots on a {}x{} tableau)",
                        self.pivots, self.rows, self.cols
                    ),
                });
            }
            self.pivot(leave, enter, &mut z, &mut obj);
        }
    }

    fn pivot(&mut self, r: usize, enter: usize, z: &mut [f64], obj: &mut f64) {
        let piv = self.tab[r][enter];
        for v in self.tab[r].iter_mut() {
            *v /= piv;
        }
        for rr in 0..self.rows {
            if rr != r {
                let factor = self.tab[rr][enter];
                if factor != 0.0 {
                    for j in 0..=self.cols {
                        self.tab[rr][j] -= factor * self.tab[r][j];
                    }
                }
            }
        }
        let zf = z[enter];
        if zf != 0.0 {
            for j in 0..self.cols {
                z[j] -= zf * self.tab[r][j];
            }
            *obj += zf * self.tab[r][self.cols];
        }
        self.basis[r] = enter;
    }

    fn drive_out_artificials(&mut self, first_artificial: usize) -> Result<()> {
        for r in 0..self.rows {
            if self.basis[r] >= first_artificial {
                if let Some(j) = (0..first_artificial).find(|&j| self.tab[r][j].abs() > EPS) {
                    let mut z = vec![0.0; self.cols];
                    let mut obj = 0.0;
                    self.pivot(r, j, &mut z, &mut obj);
                } else {
                    // Redundant row; the artificial stays basic at zero and is
                    // never eligible to enter again.
                    self.tab[r][self.cols] = 0.0;
                }
            }
        }
        Ok(())
    }
}

/// Shared-capacity data for games whose scalar flows couple through resource
/// constraints: player `i` may use `[0, min(x_max_i, min_l residual_l)]`.
#[derive(Clone, Debug)]
pub struct CoupledFlowBounds {
    /// Resources used by each player.
    pub links_of: Vec<Vec<usize>>,
    pub capacity: Vec<f64>,
    pub x_max: Vec<f64>,
}

/// Feasible flow interval of `player` given the rival entries of `rivals`.
///
/// Errors when the rivals already exceed some shared capacity, in which case
/// no feasible strategy exists.
pub fn feasible_interval(
    bounds: &CoupledFlowBounds,
    player: PlayerId,
    rivals: &StrategyProfile,
) -> Result<FeasibleSet> {
    let mut upper = bounds.x_max[player.0];
    for &l in &bounds.links_of[player.0] {
        let mut load = 0.0;
        for (j, links) in bounds.links_of.iter().enumerate() {
            if j != player.0 && links.contains(&l) {
                load += rivals.block(PlayerId(j))[0];
            }
        }
        upper = upper.min(bounds.capacity[l] - load);
    }
    if upper < 0.0 {
        if upper > -1e-9 {
            upper = 0.0; // round-off guard at an exactly saturated capacity
        } else {
            return Err(CoreError::InfeasibleRivals { player: player.0, upper });
        }
    }
    FeasibleSet::interval(0.0, upper)
}
