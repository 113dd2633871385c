//! Variable layout shared by the LP and MILP rollouts: densities, queues,
//! flows and ramp releases over the horizon, tied together by the dynamics.

use capdrop_solver::LinearProgram;

use super::RolloutProblem;
use crate::model::{demand, supply};

/// A density or queue at step 0 is data; later ones are variables.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Term {
    Const(f64),
    Var(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub n: usize,
    pub t: usize,
    /// `x[k - 1][i]` for k = 1..=T.
    pub x: Vec<Vec<usize>>,
    pub r: Vec<Vec<usize>>,
    /// `phi[k][i]` for k = 0..T.
    pub phi: Vec<Vec<usize>>,
    pub f: Vec<Vec<Option<usize>>>,
    /// Density bounds implied by the dynamics, indexed k = 0..=T.
    pub x_lo: Vec<Vec<f64>>,
    pub x_hi: Vec<Vec<f64>>,
    pub r_hi: Vec<Vec<f64>>,
    x0: Vec<f64>,
    r0: Vec<f64>,
}

/// Column indices of the rollout's state, flow and release variables in a
/// built program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RolloutColumns {
    /// `x[k - 1][i]`: density at step k = 1..=T.
    pub x: Vec<Vec<usize>>,
    /// `r[k - 1][i]`: queue at step k = 1..=T.
    pub r: Vec<Vec<usize>>,
    /// `phi[k][i]`: outflow during step k = 0..T.
    pub phi: Vec<Vec<usize>>,
    /// `f[k][i]`: ramp release during step k, where a ramp exists.
    pub f: Vec<Vec<Option<usize>>>,
}

/// Linear expression under construction: coefficients plus a constant.
#[derive(Debug, Default, Clone)]
pub(crate) struct Expr {
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Expr {
    pub fn add(mut self, term: Term, a: f64) -> Self {
        match term {
            Term::Const(v) => self.constant += a * v,
            Term::Var(j) => self.coeffs.push((j, a)),
        }
        self
    }
}

impl Layout {
    pub fn xt(&self, k: usize, i: usize) -> Term {
        if k == 0 {
            Term::Const(self.x0[i])
        } else {
            Term::Var(self.x[k - 1][i])
        }
    }

    pub fn rt(&self, k: usize, i: usize) -> Term {
        if k == 0 {
            Term::Const(self.r0[i])
        } else {
            Term::Var(self.r[k - 1][i])
        }
    }

    /// Value of a term at a solution vector.
    pub fn value(&self, term: Term, sol: &[f64]) -> f64 {
        match term {
            Term::Const(v) => v,
            Term::Var(j) => sol[j],
        }
    }

    /// `lo ≤ expr ≤ hi` as a row.
    pub fn add_row(lp: &mut LinearProgram, e: Expr, lo: f64, hi: f64) {
        lp.add_row(&e.coeffs, lo - e.constant, hi - e.constant);
    }

    /// Adds x, r, phi and f variables with dynamics rows. `phi_bounds(k, i)`
    /// gives the box for each flow.
    pub fn build(
        prob: &RolloutProblem,
        lp: &mut LinearProgram,
        mut phi_bounds: impl FnMut(&Layout, usize, usize) -> (f64, f64),
    ) -> Layout {
        let net = &prob.network;
        let n = net.len();
        let t = prob.horizon;
        let h = net.h;

        let mut r_hi = vec![prob.state.r.clone()];
        for k in 0..t {
            let next = (0..n).map(|i| r_hi[k][i] + prob.lambda[k][i]).collect();
            r_hi.push(next);
        }
        let mut x_lo = vec![prob.state.x.clone()];
        let mut x_hi = vec![prob.state.x.clone()];
        for k in 0..t {
            let mut lo = Vec::with_capacity(n);
            let mut hi = Vec::with_capacity(n);
            for i in 0..n {
                let cell = &net.cells[i];
                let upstream = if i == 0 {
                    prob.lambda0[k]
                } else {
                    let up = &net.cells[i - 1];
                    h * up.beta * demand(up, x_hi[k][i - 1])
                };
                let ramp = &net.ramps[i];
                let release = if ramp.present {
                    ramp.c.min(r_hi[k][i])
                } else {
                    0.0
                };
                let inflow_lo = if i == 0 { prob.lambda0[k] } else { 0.0 };
                lo.push(((1.0 - h * cell.v) * x_lo[k][i] + inflow_lo).max(0.0));
                // The last cell always discharges its full demand.
                let keep = if i + 1 == n { 1.0 - h * cell.v } else { 1.0 };
                let x = x_hi[k][i];
                let mut held = keep * x + upstream;
                if i > 0 {
                    // Free inflow needs x below the congestion threshold;
                    // otherwise inflow is capped by supply.
                    let free = keep * x.min(cell.x_hi) + upstream;
                    let capped = [x, x_lo[k][i]]
                        .map(|x| keep * x + h * supply(cell, x).max(0.0))
                        .into_iter()
                        .fold(f64::NEG_INFINITY, f64::max);
                    held = held.min(free.max(capped));
                }
                hi.push(held + release);
            }
            x_lo.push(lo);
            x_hi.push(hi);
        }

        let mut layout = Layout {
            n,
            t,
            x: Vec::with_capacity(t),
            r: Vec::with_capacity(t),
            phi: Vec::with_capacity(t),
            f: Vec::with_capacity(t),
            x_lo,
            x_hi,
            r_hi,
            x0: prob.state.x.clone(),
            r0: prob.state.r.clone(),
        };
        for k in 1..=t {
            let xs = (0..n)
                .map(|i| lp.add_var(1.0, layout.x_lo[k][i], layout.x_hi[k][i]))
                .collect();
            layout.x.push(xs);
            let rs = (0..n)
                .map(|i| lp.add_var(1.0, 0.0, layout.r_hi[k][i]))
                .collect();
            layout.r.push(rs);
        }
        for k in 0..t {
            let mut phis = Vec::with_capacity(n);
            for i in 0..n {
                let (lo, hi) = phi_bounds(&layout, k, i);
                phis.push(lp.add_var(0.0, lo, hi));
            }
            layout.phi.push(phis);
            let fs = (0..n)
                .map(|i| {
                    let ramp = &net.ramps[i];
                    ramp.present.then(|| {
                        let hi = if k == 0 {
                            ramp.c.min(prob.state.r[i])
                        } else {
                            ramp.c
                        };
                        lp.add_var(0.0, 0.0, hi)
                    })
                })
                .collect();
            layout.f.push(fs);
        }

        for k in 0..t {
            for i in 0..n {
                let mut e = Expr::default()
                    .add(layout.xt(k + 1, i), 1.0)
                    .add(layout.xt(k, i), -1.0)
                    .add(Term::Var(layout.phi[k][i]), h);
                if i > 0 {
                    e = e.add(Term::Var(layout.phi[k][i - 1]), -h * net.cells[i - 1].beta);
                }
                if let Some(f) = layout.f[k][i] {
                    e = e.add(Term::Var(f), -1.0);
                }
                let inflow = if i == 0 { prob.lambda0[k] } else { 0.0 };
                Self::add_row(lp, e, inflow, inflow);

                let mut e = Expr::default()
                    .add(layout.rt(k + 1, i), 1.0)
                    .add(layout.rt(k, i), -1.0);
                if let Some(f) = layout.f[k][i] {
                    e = e.add(Term::Var(f), 1.0);
                }
                let lam = prob.lambda[k][i];
                Self::add_row(lp, e, lam, lam);

                if let (Some(f), true) = (layout.f[k][i], k > 0) {
                    let e = Expr::default()
                        .add(Term::Var(f), 1.0)
                        .add(layout.rt(k, i), -1.0);
                    Self::add_row(lp, e, f64::NEG_INFINITY, 0.0);
                }
            }
        }
        layout
    }

    pub fn columns(&self) -> RolloutColumns {
        RolloutColumns {
            x: self.x.clone(),
            r: self.r.clone(),
            phi: self.phi.clone(),
            f: self.f.clone(),
        }
    }

    /// Planned releases `f[k][i]` (zero where no ramp exists).
    pub fn releases(&self, sol: &[f64]) -> Vec<Vec<f64>> {
        self.f
            .iter()
            .map(|row| {
                row.iter()
                    .map(|f| f.map_or(0.0, |j| sol[j].max(0.0)))
                    .collect()
            })
            .collect()
    }

    /// Densities for k = 0..=T.
    pub fn densities(&self, sol: &[f64]) -> Vec<Vec<f64>> {
        (0..=self.t)
            .map(|k| (0..self.n).map(|i| self.value(self.xt(k, i), sol)).collect())
            .collect()
    }

    pub fn queues(&self, sol: &[f64]) -> Vec<Vec<f64>> {
        (0..=self.t)
            .map(|k| (0..self.n).map(|i| self.value(self.rt(k, i), sol)).collect())
            .collect()
    }
}
