//! Exact hysteretic rollout as a mixed-integer program.
//!
//! For every receiving cell i ≥ 2 and step k ≥ 1 the encoding carries four
//! binaries: `a` (density at or above the onset threshold), `b` (density at
//! least `delta_c` below the decongestion threshold), the congestion flag
//! `sigma`, and `m`, which selects the active branch of min(d, s/β). Step 0
//! uses the measured flags, so its flows are data.

use capdrop_solver::{LinearProgram, MixedIntegerProgram, Sense};

use super::rollout::{Expr, Layout, RolloutColumns, Term};
use super::{ControlError, RolloutProblem};
use crate::model::{demand, supply, Network};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Switch {
    pub a: usize,
    pub b: usize,
    pub sigma: usize,
    pub m: Option<usize>,
}

/// The MILP's variable map plus what is needed to turn a release schedule
/// into a complete, consistent assignment.
#[derive(Debug, Clone)]
pub(crate) struct Encoding {
    pub layout: Layout,
    /// `switches[k][i]` for k = 1..T (index k), receiving cells i ≥ 1.
    pub switches: Vec<Vec<Option<Switch>>>,
    pub num_vars: usize,
    network: Network,
    lambda0: Vec<f64>,
    lambda: Vec<Vec<f64>>,
    x0: Vec<f64>,
    r0: Vec<f64>,
    sigma0: Vec<bool>,
    delta_c: f64,
}

fn fixed(lp: &LinearProgram, j: usize) -> Option<bool> {
    (lp.var_lo[j] == lp.var_hi[j]).then(|| lp.var_lo[j] >= 0.5)
}

/// Adds `binary == when ⇒ expr (sense) rhs`, or a plain row / nothing when
/// the binary is already fixed.
fn implies(
    mip: &mut MixedIntegerProgram,
    binary: usize,
    when: bool,
    e: Expr,
    sense: Sense,
    rhs: f64,
) {
    let rhs = rhs - e.constant;
    match fixed(&mip.base, binary) {
        Some(v) if v != when => {}
        Some(_) => {
            let (lo, hi) = match sense {
                Sense::Le => (f64::NEG_INFINITY, rhs),
                Sense::Ge => (rhs, f64::INFINITY),
                Sense::Eq => (rhs, rhs),
            };
            mip.base.add_row(&e.coeffs, lo, hi);
        }
        None => mip.add_indicator(binary, when, &e.coeffs, sense, rhs),
    }
}

fn add_binary(mip: &mut MixedIntegerProgram, lo: bool, hi: bool) -> usize {
    let j = mip.add_binary(0.0);
    mip.base.set_bounds(j, lo as u8 as f64, hi as u8 as f64);
    j
}

pub(crate) fn build(
    prob: &RolloutProblem,
    delta_c: f64,
) -> Result<(MixedIntegerProgram, Encoding), ControlError> {
    prob.check()?;
    let net = &prob.network;
    let n = net.len();
    let t = prob.horizon;
    let band = net
        .cells
        .iter()
        .map(|c| c.x_hi - c.x_lo)
        .fold(f64::INFINITY, f64::min);
    if !(delta_c > 0.0 && (delta_c < band || band == 0.0 && n == 1)) {
        return Err(ControlError::Invalid(format!(
            "delta_c = {delta_c} must be positive and below the narrowest hysteresis band ({band})"
        )));
    }
    let sigma0 = net.congestion(&prob.state.x, Some(&prob.state.sigma));
    if sigma0 != prob.state.sigma {
        return Err(ControlError::Inconsistent);
    }
    let phi0 = net.outflows(&prob.state.x, &sigma0);

    let mut lp = LinearProgram::new();
    let layout = Layout::build(prob, &mut lp, |layout, k, i| {
        if k == 0 {
            (phi0[i], phi0[i])
        } else {
            (0.0, demand(&net.cells[i], layout.x_hi[k][i]))
        }
    });
    let mut mip = MixedIntegerProgram::new(lp);
    let mut switches = vec![vec![None; n]; t];
    let mut possible: Vec<[bool; 2]> = sigma0.iter().map(|&s| [!s, s]).collect();

    for k in 1..t {
        for i in 0..n {
            let cell = &net.cells[i];
            let phi = Term::Var(layout.phi[k][i]);
            let d = Expr::default().add(phi, 1.0).add(layout.xt(k, i), -cell.v);
            if i + 1 == n {
                Layout::add_row(&mut mip.base, d, 0.0, 0.0);
            } else {
                Layout::add_row(&mut mip.base, d, f64::NEG_INFINITY, 0.0);
            }
        }
        for i in 1..n {
            let cell = &net.cells[i];
            let (lo, hi) = (layout.x_lo[k][i], layout.x_hi[k][i]);
            let x = layout.xt(k, i);
            let onset = cell.x_hi - delta_c;
            let release = cell.x_lo - delta_c;

            let a = add_binary(&mut mip, lo > onset, hi >= cell.x_hi);
            let b = add_binary(&mut mip, hi < cell.x_lo, lo <= release);
            let a_fix = fixed(&mip.base, a);
            let b_fix = fixed(&mip.base, b);
            let now = if a_fix == Some(true) {
                [false, true]
            } else if b_fix == Some(true) {
                [true, false]
            } else {
                [
                    possible[i][0] || b_fix != Some(false),
                    possible[i][1] || a_fix != Some(false),
                ]
            };
            let sigma = add_binary(&mut mip, !now[0], now[1]);
            let sigma_fix = fixed(&mip.base, sigma);

            let xe = || Expr::default().add(x, 1.0);
            implies(&mut mip, a, true, xe(), Sense::Ge, cell.x_hi);
            implies(&mut mip, a, false, xe(), Sense::Le, onset);
            implies(&mut mip, b, true, xe(), Sense::Le, release);
            implies(&mut mip, b, false, xe(), Sense::Ge, cell.x_lo);

            if sigma_fix.is_none() {
                // a ⇒ σ, b ⇒ ¬σ, and σ follows its predecessor when neither fires.
                let prev = if k == 1 {
                    Term::Const(sigma0[i] as u8 as f64)
                } else {
                    Term::Var(switches[k - 1][i].map(|s: Switch| s.sigma).unwrap())
                };
                let s = Term::Var(sigma);
                let (av, bv) = (Term::Var(a), Term::Var(b));
                let rows = [
                    Expr::default().add(av, 1.0).add(s, -1.0),
                    Expr::default().add(s, 1.0).add(bv, 1.0).add(Term::Const(1.0), -1.0),
                    Expr::default()
                        .add(s, 1.0)
                        .add(prev, -1.0)
                        .add(av, -1.0)
                        .add(bv, -1.0),
                    Expr::default()
                        .add(prev, 1.0)
                        .add(s, -1.0)
                        .add(av, -1.0)
                        .add(bv, -1.0),
                ];
                for e in rows {
                    Layout::add_row(&mut mip.base, e, f64::NEG_INFINITY, 0.0);
                }
            }

            let up = &net.cells[i - 1];
            let flow = Term::Var(layout.phi[k][i - 1]);
            let x_up = layout.xt(k, i - 1);
            let above_demand = || Expr::default().add(flow, 1.0).add(x_up, -up.v);
            let m = if up.beta > 0.0 {
                implies(&mut mip, sigma, false, above_demand(), Sense::Ge, 0.0);
                let cap = || Expr::default().add(flow, up.beta).add(x, cell.w);
                implies(&mut mip, sigma, true, cap(), Sense::Le, cell.w * cell.x_jam);
                let demand_binds =
                    up.beta * demand(up, layout.x_hi[k][i - 1]) <= supply(cell, hi);
                let m_fixed = sigma_fix == Some(false) || demand_binds;
                let m = add_binary(&mut mip, m_fixed, true);
                implies(&mut mip, m, true, above_demand(), Sense::Ge, 0.0);
                implies(&mut mip, m, false, cap(), Sense::Ge, cell.w * cell.x_jam);
                Some(m)
            } else {
                Layout::add_row(&mut mip.base, above_demand(), 0.0, f64::INFINITY);
                None
            };
            switches[k][i] = Some(Switch { a, b, sigma, m });
            possible[i] = now;
        }
    }

    let enc = Encoding {
        num_vars: mip.base.num_vars(),
        layout,
        switches,
        network: net.clone(),
        lambda0: prob.lambda0.clone(),
        lambda: prob.lambda.clone(),
        x0: prob.state.x.clone(),
        r0: prob.state.r.clone(),
        sigma0,
        delta_c,
    };
    Ok((mip, enc))
}

/// The hysteretic rollout as a mixed-integer program.
pub fn build_ehmpc(
    prob: &RolloutProblem,
    delta_c: f64,
) -> Result<MixedIntegerProgram, ControlError> {
    build(prob, delta_c).map(|(mip, _)| mip)
}

/// Like [`build_ehmpc`], also returning where the rollout variables live.
pub fn build_ehmpc_with_columns(
    prob: &RolloutProblem,
    delta_c: f64,
) -> Result<(MixedIntegerProgram, RolloutColumns), ControlError> {
    build(prob, delta_c).map(|(mip, enc)| (mip, enc.layout.columns()))
}

impl Encoding {
    /// Simulates `releases[k][i]` (clipped to queue and capacity) under the
    /// encoding's switching rule and returns the matching assignment of every
    /// MILP variable. The result violates the MILP only if the trajectory
    /// enters one of the `delta_c` guard bands.
    pub fn complete(&self, releases: &[Vec<f64>]) -> Vec<f64> {
        let net = &self.network;
        let lay = &self.layout;
        let n = lay.n;
        let h = net.h;
        let mut out = vec![0.0; self.num_vars];
        let mut x = self.x0.clone();
        let mut r = self.r0.clone();
        let mut flags = self.sigma0.clone();
        for k in 0..lay.t {
            if k > 0 {
                for i in 1..n {
                    let cell = &net.cells[i];
                    let a = x[i] >= cell.x_hi;
                    let b = x[i] <= cell.x_lo - self.delta_c;
                    if a {
                        flags[i] = true;
                    } else if b {
                        flags[i] = false;
                    }
                    if let Some(sw) = self.switches[k][i] {
                        out[sw.a] = a as u8 as f64;
                        out[sw.b] = b as u8 as f64;
                        out[sw.sigma] = flags[i] as u8 as f64;
                    }
                }
            }
            let phi = net.outflows(&x, &flags);
            for i in 0..n {
                out[lay.phi[k][i]] = phi[i];
            }
            if k > 0 {
                for i in 1..n {
                    if let Some(Switch { m: Some(m), .. }) = self.switches[k][i] {
                        let up = &net.cells[i - 1];
                        let capped = flags[i] && supply(&net.cells[i], x[i]) < up.beta * demand(up, x[i - 1]);
                        out[m] = (!capped) as u8 as f64;
                    }
                }
            }
            let mut nx = x.clone();
            for i in 0..n {
                let inflow = if i == 0 {
                    self.lambda0[k]
                } else {
                    h * net.cells[i - 1].beta * phi[i - 1]
                };
                let f = match lay.f[k][i] {
                    Some(j) => {
                        let f = releases[k][i].max(0.0).min(net.ramps[i].c).min(r[i]);
                        out[j] = f;
                        f
                    }
                    None => 0.0,
                };
                nx[i] = x[i] + inflow - h * phi[i] + f;
                r[i] += self.lambda[k][i] - f;
                out[lay.x[k][i]] = nx[i];
                out[lay.r[k][i]] = r[i];
            }
            x = nx;
        }
        out
    }
}
