//! Two-cell throughput gap and sufficient rollout horizon.

use serde::Serialize;
use thiserror::Error;

use crate::model::{CellParams, Network};

/// Iteration cap for the recovery recursion.
pub const DEFAULT_RECOVERY_CAP: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("analysis requires a two-cell network, got {0} cells")]
    NotTwoCell(usize),
    #[error("cell 2 cannot drain: drain rate {rate} is not positive")]
    NonDrainable { rate: f64 },
    #[error("cell 2 never reaches x_hi within {cap} steps")]
    Unreachable { cap: usize },
    #[error("no throughput gap: E_hyst = {e_hyst} does not exceed E_convex = {e_convex}")]
    NoGap { e_hyst: f64, e_convex: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoCellAnalysis {
    pub x_c: f64,
    pub x1_target: f64,
    pub e_convex: f64,
    pub e_hyst: f64,
    pub delta_e: f64,
    pub fill_ok: bool,
    pub drain_ok: bool,
    pub gap_ok: bool,
}

impl TwoCellAnalysis {
    pub fn all_ok(&self) -> bool {
        self.fill_ok && self.drain_ok && self.gap_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonBudget {
    pub t_d: usize,
    pub t_r: usize,
    pub t_s: usize,
    pub e_decon_avg: f64,
    pub e_recov_avg: f64,
    pub total: usize,
}

/// Density at which supply equals demand.
pub fn critical_density(cell: &CellParams) -> f64 {
    cell.w * cell.x_jam / (cell.v + cell.w)
}

fn two_cells(net: &Network) -> Result<(&CellParams, &CellParams), AnalysisError> {
    match net.cells.as_slice() {
        [c1, c2] => Ok((c1, c2)),
        cells => Err(AnalysisError::NotTwoCell(cells.len())),
    }
}

pub fn check_prop1(net: &Network, lambda0: f64) -> Result<TwoCellAnalysis, AnalysisError> {
    let (c1, c2) = two_cells(net)?;
    let h = net.h;
    let x_c = critical_density(c2);
    let x1_target = c2.v * c2.x_hi / (c1.beta * c1.v);
    let e_convex = h * c2.v * x_c / c1.beta;
    let e_hyst = h * c2.v * c2.x_hi / c1.beta;
    Ok(TwoCellAnalysis {
        x_c,
        x1_target,
        e_convex,
        e_hyst,
        delta_e: e_hyst - e_convex,
        fill_ok: lambda0 + net.ramps[0].c > h * c1.v * x1_target,
        drain_ok: c1.beta * lambda0 < h * c2.v * c2.x_lo,
        gap_ok: x_c < c2.x_hi,
    })
}

fn ceil_count(num: f64, den: f64) -> usize {
    let q = num / den;
    // Guard against 10/8 landing a hair above an integer.
    let r = q.round();
    let q = if (q - r).abs() <= 1e-9 * r.abs().max(1.0) { r } else { q };
    q.ceil().max(0.0) as usize
}

/// Steps needed to decongest cell 2, from the cell-1 density `x1_0`.
pub fn horizon_t_d(net: &Network, x1_0: f64, lambda0_avg: f64) -> Result<usize, AnalysisError> {
    let (c1, c2) = two_cells(net)?;
    let rate = net.h * c2.v * c2.x_lo - c1.beta * lambda0_avg;
    if rate <= 0.0 {
        return Err(AnalysisError::NonDrainable { rate });
    }
    let x_c = critical_density(c2);
    Ok(ceil_count(c1.beta * x1_0 + (x_c - c2.x_lo), rate))
}

/// Steps for cell 2 to climb back to `x_hi` with full release at ramp 1.
pub fn horizon_t_r(
    net: &Network,
    lambda0: &[f64],
    x1_start: f64,
    x2_start: f64,
    cap: usize,
) -> Result<usize, AnalysisError> {
    let (c1, c2) = two_cells(net)?;
    horizon_t_r_general(
        |x| c1.v * x,
        |x| c2.v * x,
        &GeneralParams::from_network(net),
        lambda0,
        x1_start,
        x2_start,
        cap,
    )
}

pub fn e_decon_avg(net: &Network, x1_0: f64) -> Result<f64, AnalysisError> {
    let (c1, c2) = two_cells(net)?;
    let x_c = critical_density(c2);
    Ok(net.h
        * ((1.0 - c1.beta) * c1.v * x1_0 / 2.0 + c2.v * (x_c - c2.x_lo) / 2.0))
}

pub fn e_recov_avg(net: &Network) -> Result<f64, AnalysisError> {
    let (c1, c2) = two_cells(net)?;
    let x1_target = c2.v * c2.x_hi / (c1.beta * c1.v);
    Ok(net.h * ((1.0 - c1.beta) * c1.v * 0.5 * x1_target + c2.v * (c2.x_hi - c2.x_lo) / 2.0))
}

pub fn horizon_t_s(
    t_d: usize,
    t_r: usize,
    e_convex: f64,
    e_hyst: f64,
    e_decon: f64,
    e_recov: f64,
) -> Result<usize, AnalysisError> {
    if e_hyst <= e_convex {
        return Err(AnalysisError::NoGap { e_hyst, e_convex });
    }
    let (t_d, t_r) = (t_d as f64, t_r as f64);
    let num = (t_d + t_r) * e_convex - (t_d * e_decon + t_r * e_recov);
    if num <= 0.0 {
        return Ok(0);
    }
    Ok(ceil_count(num, e_hyst - e_convex))
}

/// Full budget for a two-cell network. The recovery phase starts from the
/// worst case `x1 = 0`, `x2 = x_lo`.
pub fn horizon_budget(
    net: &Network,
    x1_0: f64,
    lambda0: &[f64],
) -> Result<HorizonBudget, AnalysisError> {
    let (_, c2) = two_cells(net)?;
    let avg = mean(lambda0);
    let prop = check_prop1(net, avg)?;
    let t_d = horizon_t_d(net, x1_0, avg)?;
    let t_r = horizon_t_r(net, lambda0, 0.0, c2.x_lo, DEFAULT_RECOVERY_CAP)?;
    let e_decon = e_decon_avg(net, x1_0)?;
    let e_recov = e_recov_avg(net)?;
    let t_s = horizon_t_s(t_d, t_r, prop.e_convex, prop.e_hyst, e_decon, e_recov)?;
    Ok(HorizonBudget {
        t_d,
        t_r,
        t_s,
        e_decon_avg: e_decon,
        e_recov_avg: e_recov,
        total: t_d + t_r + t_s,
    })
}

/// Budget using the demand-function forms, with affine demands taken from the
/// network. Averages over the decongestion and recovery phases are the same
/// as in [`horizon_budget`].
pub fn horizon_budget_general(
    net: &Network,
    lambda0: &[f64],
) -> Result<HorizonBudget, AnalysisError> {
    let (c1, c2) = two_cells(net)?;
    let params = GeneralParams::from_network(net);
    let avg = mean(lambda0);
    let prop = check_prop1(net, avg)?;
    let t_d = horizon_t_d_general(|x| c2.v * x, &params, avg)?;
    let t_r = horizon_t_r_general(
        |x| c1.v * x,
        |x| c2.v * x,
        &params,
        lambda0,
        0.0,
        c2.x_lo,
        DEFAULT_RECOVERY_CAP,
    )?;
    let e_decon = e_decon_avg(net, params.x_c)?;
    let e_recov = e_recov_avg(net)?;
    let t_s = horizon_t_s(t_d, t_r, prop.e_convex, prop.e_hyst, e_decon, e_recov)?;
    Ok(HorizonBudget {
        t_d,
        t_r,
        t_s,
        e_decon_avg: e_decon,
        e_recov_avg: e_recov,
        total: t_d + t_r + t_s,
    })
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Scalars the demand-function horizon forms need.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralParams {
    pub h: f64,
    pub beta1: f64,
    pub c1: f64,
    pub x_c: f64,
    pub x_lo2: f64,
    pub x_hi2: f64,
}

impl GeneralParams {
    pub fn from_network(net: &Network) -> Self {
        let c2 = &net.cells[net.cells.len().min(2) - 1];
        Self {
            h: net.h,
            beta1: net.cells[0].beta,
            c1: net.ramps[0].c,
            x_c: critical_density(c2),
            x_lo2: c2.x_lo,
            x_hi2: c2.x_hi,
        }
    }
}

pub fn horizon_t_d_general(
    d2: impl Fn(f64) -> f64,
    p: &GeneralParams,
    lambda0_avg: f64,
) -> Result<usize, AnalysisError> {
    let rate = p.h * d2(p.x_lo2) - lambda0_avg;
    if rate <= 0.0 {
        return Err(AnalysisError::NonDrainable { rate });
    }
    Ok(ceil_count(p.beta1 * p.x_c + (p.x_c - p.x_lo2), rate))
}

/// First `k` at which the accumulated net inflow into cell 2 has raised it
/// from `x2_start` to `x_hi`.
pub fn horizon_t_r_general(
    d1: impl Fn(f64) -> f64,
    d2: impl Fn(f64) -> f64,
    p: &GeneralParams,
    lambda0: &[f64],
    x1_start: f64,
    x2_start: f64,
    cap: usize,
) -> Result<usize, AnalysisError> {
    let lam = |k: usize| {
        lambda0
            .get(k)
            .or_else(|| lambda0.last())
            .copied()
            .unwrap_or(0.0)
    };
    let target = p.x_hi2 - x2_start;
    let (mut x1, mut x2) = (x1_start, x2_start);
    let mut gained = 0.0;
    for k in 0..=cap {
        if gained >= target - 1e-12 {
            return Ok(k);
        }
        let delta = p.h * (p.beta1 * d1(x1) - d2(x2));
        gained += delta;
        x2 += delta;
        x1 = x1 + p.c1 + lam(k) - p.h * d1(x1);
    }
    Err(AnalysisError::Unreachable { cap })
}
