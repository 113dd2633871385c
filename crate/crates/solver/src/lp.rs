//! Bounded linear programs and the primal simplex front end.

use thiserror::Error;

use crate::simplex::{Outcome, Tableau};

/// Default primal feasibility tolerance.
pub const DEFAULT_TOL: f64 = 1e-7;

/// `minimize cost·x  s.t.  row_lo <= A x <= row_hi,  var_lo <= x <= var_hi`.
///
/// Rows of `A` are stored sparsely as `(column, coefficient)` lists; the solver
/// itself works on a dense tableau. Infinite bounds are allowed on either side.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub var_lo: Vec<f64>,
    pub var_hi: Vec<f64>,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub row_lo: Vec<f64>,
    pub row_hi: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; empty unless `status` is optimal.
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Dimension(String),
    #[error("simplex iteration limit reached after {0} iterations")]
    IterationLimit(usize),
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_var(&mut self, cost: f64, lo: f64, hi: f64) -> usize {
        self.cost.push(cost);
        self.var_lo.push(lo);
        self.var_hi.push(hi);
        self.cost.len() - 1
    }

    /// Adds `lo <= Σ coeff·x <= hi`. Repeated columns are merged.
    pub fn add_row(&mut self, coeffs: &[(usize, f64)], lo: f64, hi: f64) -> usize {
        self.rows.push(merge_coeffs(coeffs));
        self.row_lo.push(lo);
        self.row_hi.push(hi);
        self.rows.len() - 1
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) {
        self.var_lo[var] = lo;
        self.var_hi[var] = hi;
    }

    pub fn check(&self) -> Result<(), LpError> {
        let n = self.cost.len();
        if self.var_lo.len() != n || self.var_hi.len() != n {
            return Err(LpError::Dimension(format!(
                "{} costs but {} lower / {} upper variable bounds",
                n,
                self.var_lo.len(),
                self.var_hi.len()
            )));
        }
        let m = self.rows.len();
        if self.row_lo.len() != m || self.row_hi.len() != m {
            return Err(LpError::Dimension(format!(
                "{} rows but {} lower / {} upper row bounds",
                m,
                self.row_lo.len(),
                self.row_hi.len()
            )));
        }
        for (r, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                if j >= n {
                    return Err(LpError::Dimension(format!(
                        "row {r} references column {j} of {n}"
                    )));
                }
                if !a.is_finite() {
                    return Err(LpError::Dimension(format!(
                        "row {r} has non-finite coefficient on column {j}"
                    )));
                }
            }
        }
        if self.cost.iter().any(|c| !c.is_finite()) {
            return Err(LpError::Dimension("non-finite objective coefficient".into()));
        }
        let nan_bound = self
            .var_lo
            .iter()
            .chain(&self.var_hi)
            .chain(&self.row_lo)
            .chain(&self.row_hi)
            .any(|b| b.is_nan());
        if nan_bound {
            return Err(LpError::Dimension("NaN bound".into()));
        }
        Ok(())
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn row_activity(&self, row: usize, x: &[f64]) -> f64 {
        self.rows[row].iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Largest bound or row violation of `x`, scaled per row by `max(1, |bound|)`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.var_lo[j] - v).max(v - self.var_hi[j]);
        }
        for r in 0..self.rows.len() {
            let act = self.row_activity(r, x);
            let (lo, hi) = (self.row_lo[r], self.row_hi[r]);
            if act < lo {
                worst = worst.max((lo - act) / lo.abs().max(1.0));
            }
            if act > hi {
                worst = worst.max((act - hi) / hi.abs().max(1.0));
            }
        }
        worst
    }

    pub(crate) fn trivially_infeasible(&self) -> bool {
        self.var_lo.iter().zip(&self.var_hi).any(|(l, h)| l > h)
            || self.row_lo.iter().zip(&self.row_hi).any(|(l, h)| l > h)
    }
}

pub(crate) fn merge_coeffs(coeffs: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
    for &(j, a) in coeffs {
        match out.iter_mut().find(|(k, _)| *k == j) {
            Some(entry) => entry.1 += a,
            None => out.push((j, a)),
        }
    }
    out.retain(|&(_, a)| a != 0.0);
    out
}

/// Solves `lp` with the bounded-variable primal simplex.
///
/// Pricing is Dantzig's rule; after a run of degenerate pivots the solver
/// switches to Bland's rule (lowest-index entering and leaving variable)
/// until progress resumes, which rules out cycling.
pub fn solve_lp(lp: &LinearProgram, tol: f64) -> Result<LpSolution, LpError> {
    lp.check()?;
    if lp.trivially_infeasible() {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: Vec::new(),
            objective: f64::INFINITY,
            iterations: 0,
        });
    }
    let mut tableau = Tableau::new(lp, tol);
    let outcome = tableau.primal();
    let iterations = tableau.iterations;
    match outcome {
        Outcome::Optimal => {
            let x = tableau.structural_values();
            Ok(LpSolution {
                status: LpStatus::Optimal,
                objective: lp.objective_at(&x),
                x,
                iterations,
            })
        }
        Outcome::Infeasible => Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: Vec::new(),
            objective: f64::INFINITY,
            iterations,
        }),
        Outcome::Unbounded => Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            objective: f64::NEG_INFINITY,
            iterations,
        }),
        Outcome::IterationLimit => Err(LpError::IterationLimit(iterations)),
    }
}
