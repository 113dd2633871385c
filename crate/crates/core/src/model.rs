//! Cell transmission model with capacity-drop hysteresis.
//!
//! Mainline flows (`phi`, demand, supply) are in veh/hour and are scaled by the
//! sampling interval `h` when they move density. Ramp releases, ramp inflows
//! and the upstream inflow are per-timestep quantities and enter unscaled.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    /// Free-flow speed.
    pub v: f64,
    /// Shock-wave speed.
    pub w: f64,
    pub x_jam: f64,
    /// Density at which the cell becomes congested.
    pub x_hi: f64,
    /// Density at or below which the cell decongests.
    pub x_lo: f64,
    /// Fraction of the outflow that continues to the next cell.
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampParams {
    /// Maximum release per timestep.
    pub c: f64,
    pub present: bool,
}

impl RampParams {
    pub const ABSENT: RampParams = RampParams {
        c: 0.0,
        present: false,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub h: f64,
    pub cells: Vec<CellParams>,
    pub ramps: Vec<RampParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    /// Congestion flags consistent with `x` under the hysteresis rule.
    pub sigma: Vec<bool>,
}

/// Everything one timestep of the plant produces.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub next: NetworkState,
    /// Flags used for this step's flows.
    pub sigma: Vec<bool>,
    pub phi: Vec<f64>,
    pub releases: Vec<f64>,
    pub exit_flow: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("{what}[{index}] = {value} is negative or not finite")]
    BadValue {
        what: &'static str,
        index: usize,
        value: f64,
    },
}

/// One violated network invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Empty,
    Step(f64),
    Cell { index: usize, problem: String },
    Ramp { index: usize, problem: String },
    Cfl { index: usize, product: f64 },
    RampCount { cells: usize, ramps: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "network has no cells"),
            Violation::Step(h) => write!(f, "sampling interval h = {h} must be positive"),
            Violation::Cell { index, problem } => write!(f, "cell {}: {problem}", index + 1),
            Violation::Ramp { index, problem } => write!(f, "ramp {}: {problem}", index + 1),
            Violation::Cfl { index, product } => write!(
                f,
                "cell {}: CFL condition violated (h·speed = {product} > 1)",
                index + 1
            ),
            Violation::RampCount { cells, ramps } => {
                write!(f, "{ramps} ramp entries for {cells} cells")
            }
        }
    }
}

pub fn supply(cell: &CellParams, x: f64) -> f64 {
    -cell.w * (x - cell.x_jam)
}

pub fn demand(cell: &CellParams, x: f64) -> f64 {
    cell.v * x
}

/// Hysteretic congestion flag. `previous` is `None` at initialization, where
/// a density inside the band starts uncongested.
pub fn update_congestion(cell: &CellParams, x: f64, previous: Option<bool>) -> bool {
    if x >= cell.x_hi {
        true
    } else if x <= cell.x_lo {
        false
    } else {
        previous.unwrap_or(false)
    }
}

/// Outflow of a cell whose downstream neighbour has flag `sigma_next` and
/// supply `supply_next`. A congested neighbour caps the flow at its supply
/// (scaled by the continuation ratio); the result is never negative.
pub fn outflow(cell: &CellParams, x: f64, sigma_next: bool, supply_next: f64) -> f64 {
    let d = demand(cell, x);
    if sigma_next && cell.beta > 0.0 {
        d.min(supply_next / cell.beta).max(0.0)
    } else {
        d
    }
}

/// Vehicles leaving through offramps and past the last cell in one timestep.
pub fn exit_flow(net: &Network, phi: &[f64]) -> f64 {
    let n = net.cells.len();
    let offramps: f64 = net.cells[..n - 1]
        .iter()
        .zip(phi)
        .map(|(cell, p)| (1.0 - cell.beta) * p)
        .sum();
    net.h * (offramps + phi[n - 1])
}

impl Network {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Indices of cells with an onramp.
    pub fn ramp_cells(&self) -> Vec<usize> {
        self.ramps
            .iter()
            .enumerate()
            .filter(|(_, r)| r.present)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        if self.cells.is_empty() {
            out.push(Violation::Empty);
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            out.push(Violation::Step(self.h));
        }
        if self.ramps.len() != self.cells.len() {
            out.push(Violation::RampCount {
                cells: self.cells.len(),
                ramps: self.ramps.len(),
            });
        }
        for (index, cell) in self.cells.iter().enumerate() {
            let mut problem = |p: String| out.push(Violation::Cell { index, problem: p });
            let finite = [cell.v, cell.w, cell.x_jam, cell.x_hi, cell.x_lo, cell.beta]
                .iter()
                .all(|v| v.is_finite());
            if !finite {
                problem("parameters must be finite".into());
                continue;
            }
            if cell.v <= 0.0 {
                problem(format!("free-flow speed v = {} must be positive", cell.v));
            }
            if cell.w <= 0.0 {
                problem(format!("shock-wave speed w = {} must be positive", cell.w));
            }
            if cell.x_jam <= 0.0 {
                problem(format!("jam density x_jam = {} must be positive", cell.x_jam));
            }
            if cell.x_lo <= 0.0 {
                problem(format!("x_lo = {} must be positive", cell.x_lo));
            }
            if cell.x_lo > cell.x_hi {
                problem(format!("x_lo = {} exceeds x_hi = {}", cell.x_lo, cell.x_hi));
            }
            if cell.x_hi >= cell.x_jam {
                problem(format!(
                    "x_hi = {} must be below x_jam = {}",
                    cell.x_hi, cell.x_jam
                ));
            }
            if !(0.0..=1.0).contains(&cell.beta) {
                problem(format!("beta = {} must lie in [0, 1]", cell.beta));
            }
            if self.h > 0.0 {
                let product = self.h * cell.v.max(cell.w);
                if product > 1.0 {
                    out.push(Violation::Cfl { index, product });
                }
            }
        }
        for (index, ramp) in self.ramps.iter().enumerate() {
            if !(ramp.c >= 0.0 && ramp.c.is_finite()) {
                out.push(Violation::Ramp {
                    index,
                    problem: format!("capacity c = {} must be non-negative", ramp.c),
                });
            } else if !ramp.present && ramp.c != 0.0 {
                out.push(Violation::Ramp {
                    index,
                    problem: format!("absent ramp must have c = 0, got {}", ramp.c),
                });
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    /// Flags for densities `x` given the previous flags.
    pub fn congestion(&self, x: &[f64], previous: Option<&[bool]>) -> Vec<bool> {
        self.cells
            .iter()
            .enumerate()
            .map(|(i, cell)| update_congestion(cell, x[i], previous.map(|p| p[i])))
            .collect()
    }

    /// Mainline outflows for densities `x` and flags `sigma`.
    pub fn outflows(&self, x: &[f64], sigma: &[bool]) -> Vec<f64> {
        let n = self.cells.len();
        (0..n)
            .map(|i| {
                let cell = &self.cells[i];
                if i + 1 < n {
                    let next = &self.cells[i + 1];
                    outflow(cell, x[i], sigma[i + 1], supply(next, x[i + 1]))
                } else {
                    demand(cell, x[i])
                }
            })
            .collect()
    }
}

fn check_len(what: &'static str, got: usize, expected: usize) -> Result<(), ModelError> {
    if got == expected {
        Ok(())
    } else {
        Err(ModelError::Dimension {
            what,
            got,
            expected,
        })
    }
}

fn check_values(what: &'static str, values: &[f64]) -> Result<(), ModelError> {
    match values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        Some(index) => Err(ModelError::BadValue {
            what,
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

impl NetworkState {
    /// Initial state with flags derived from the densities alone.
    pub fn initial(net: &Network, x: Vec<f64>, r: Vec<f64>) -> Self {
        let sigma = net.congestion(&x, None);
        Self { x, r, sigma }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            x: vec![0.0; n],
            r: vec![0.0; n],
            sigma: vec![false; n],
        }
    }

    /// Σx + Σr.
    pub fn vehicles(&self) -> f64 {
        self.x.iter().sum::<f64>() + self.r.iter().sum::<f64>()
    }
}

/// Advances the plant one timestep under per-cell metering rates `u`
/// (entries for cells without an onramp are ignored).
pub fn step(
    net: &Network,
    state: &NetworkState,
    u: &[f64],
    lambda0: f64,
    lambda: &[f64],
) -> Result<StepOutput, ModelError> {
    check_len("u", u.len(), net.len())?;
    check_len("r", state.r.len(), net.len())?;
    let releases: Vec<f64> = net
        .ramps
        .iter()
        .zip(u)
        .zip(&state.r)
        .map(|((ramp, &ui), &ri)| ri.min(ui.clamp(0.0, 1.0) * ramp.c))
        .collect();
    step_with_releases(net, state, &releases, lambda0, lambda)
}

/// Like [`step`], but with ramp releases given directly (clamped to the queue
/// and the ramp capacity).
pub fn step_with_releases(
    net: &Network,
    state: &NetworkState,
    releases: &[f64],
    lambda0: f64,
    lambda: &[f64],
) -> Result<StepOutput, ModelError> {
    let n = net.len();
    check_len("x", state.x.len(), n)?;
    check_len("r", state.r.len(), n)?;
    check_len("sigma", state.sigma.len(), n)?;
    check_len("releases", releases.len(), n)?;
    check_len("lambda", lambda.len(), n)?;
    check_values("x", &state.x)?;
    check_values("r", &state.r)?;
    check_values("lambda", lambda)?;
    check_values("lambda0", &[lambda0])?;

    let sigma = net.congestion(&state.x, Some(&state.sigma));
    let phi = net.outflows(&state.x, &sigma);
    let releases: Vec<f64> = (0..n)
        .map(|i| releases[i].max(0.0).min(net.ramps[i].c).min(state.r[i]))
        .collect();
    let h = net.h;
    let mut x = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    for i in 0..n {
        let inflow = if i == 0 {
            lambda0
        } else {
            h * net.cells[i - 1].beta * phi[i - 1]
        };
        x.push(state.x[i] + inflow - h * phi[i] + releases[i]);
        r.push(state.r[i] + lambda[i] - releases[i]);
    }
    check_values("next x", &x)?;
    check_values("next r", &r)?;
    check_values("phi", &phi)?;
    let exit = exit_flow(net, &phi);
    let next_sigma = net.congestion(&x, Some(&sigma));
    Ok(StepOutput {
        next: NetworkState {
            x,
            r,
            sigma: next_sigma,
        },
        sigma,
        phi,
        releases,
        exit_flow: exit,
    })
}
