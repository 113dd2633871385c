//! Receding-horizon closed loop and run records.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::controllers::{plan, ControlError, ControllerConfig, ControllerKind, RolloutProblem, SolveStatus};
use crate::model::{step, ModelError, NetworkState};
use crate::scenario::Scenario;

/// One simulated timestep: the state it started from and what happened.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRow {
    pub k: usize,
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    pub sigma: Vec<bool>,
    pub phi: Vec<f64>,
    pub u: Vec<f64>,
    pub exit_flow: f64,
    pub cumulative_exits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveRow {
    pub step: usize,
    pub wall_time: f64,
    pub nodes: usize,
    pub objective: Option<f64>,
    pub status: SolveStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub scenario: String,
    pub controller: ControllerKind,
    pub rows: Vec<StepRow>,
    pub solves: Vec<SolveRow>,
    pub final_state: NetworkState,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("controller failed at step {step}: {source}")]
    Control {
        step: usize,
        source: ControlError,
        partial: Box<RunRecord>,
    },
    #[error("simulation failed at step {step}: {source}")]
    Model {
        step: usize,
        source: ModelError,
        partial: Box<RunRecord>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub controller: ControllerKind,
    pub steps: usize,
    pub cumulative_exits: f64,
    pub final_vehicles: f64,
    pub solves: usize,
    pub total_solve_time: f64,
    pub max_solve_time: f64,
    pub limited_solves: usize,
    pub fallback_solves: usize,
}

impl RunRecord {
    pub fn cumulative_exits(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cumulative_exits)
    }

    /// Mean exit flow over the last `window` steps.
    pub fn tail_exit_rate(&self, window: usize) -> f64 {
        let tail = &self.rows[self.rows.len().saturating_sub(window)..];
        if tail.is_empty() {
            0.0
        } else {
            tail.iter().map(|r| r.exit_flow).sum::<f64>() / tail.len() as f64
        }
    }

    pub fn summary(&self) -> RunSummary {
        let times = self.solves.iter().map(|s| s.wall_time);
        RunSummary {
            scenario: self.scenario.clone(),
            controller: self.controller,
            steps: self.rows.len(),
            cumulative_exits: self.cumulative_exits(),
            final_vehicles: self.final_state.vehicles(),
            solves: self.solves.len(),
            total_solve_time: times.clone().sum(),
            max_solve_time: times.fold(0.0, f64::max),
            limited_solves: self
                .solves
                .iter()
                .filter(|s| matches!(s.status, SolveStatus::NodeLimit | SolveStatus::TimeLimit))
                .count(),
            fallback_solves: self
                .solves
                .iter()
                .filter(|s| s.status == SolveStatus::Fallback)
                .count(),
        }
    }
}

/// Runs `cfg` against the plant for the scenario's K steps, re-planning
/// after every `memory` applied actions.
pub fn run_closed_loop(scenario: &Scenario, cfg: &ControllerConfig) -> Result<RunRecord, RunError> {
    scenario
        .validate()
        .map_err(|e| RunError::Config(e.join("; ")))?;
    cfg.validate(&scenario.network).map_err(RunError::Config)?;
    let net = &scenario.network;
    let n = net.len();
    let mut state = scenario.initial_state();
    let mut record = RunRecord {
        scenario: scenario.name.clone().unwrap_or_default(),
        controller: cfg.kind,
        rows: Vec::with_capacity(scenario.k),
        solves: Vec::new(),
        final_state: state.clone(),
    };
    let mut hint: Option<Vec<Vec<f64>>> = None;
    let mut cumulative = 0.0;
    let mut k = 0;
    while k < scenario.k {
        let mut prob = RolloutProblem::from_scenario(scenario, state.clone(), k, cfg.horizon);
        prob.hint = hint.take();
        let (control, report) = match plan(cfg, &prob) {
            Ok(p) => p,
            Err(source) => {
                record.final_state = state;
                return Err(RunError::Control {
                    step: k,
                    source,
                    partial: Box::new(record),
                });
            }
        };
        if let Some(w) = &report.warning {
            log::warn!("step {k}: {w}");
        }
        record.solves.push(SolveRow {
            step: k,
            wall_time: report.wall_time.as_secs_f64(),
            nodes: report.nodes,
            objective: report.objective,
            status: report.status,
            warning: report.warning.clone(),
        });
        if report.releases.len() > control.len() {
            hint = Some(report.releases[control.len()..].to_vec());
        }
        for j in 0..control.len() {
            if k >= scenario.k {
                break;
            }
            let u = control.cell_rates(j, n);
            let out = match step(net, &state, &u, scenario.lambda0_at(k), &scenario.lambda_at(k)) {
                Ok(out) => out,
                Err(source) => {
                    record.final_state = state;
                    return Err(RunError::Model {
                        step: k,
                        source,
                        partial: Box::new(record),
                    });
                }
            };
            cumulative += out.exit_flow;
            record.rows.push(StepRow {
                k,
                x: state.x.clone(),
                r: state.r.clone(),
                sigma: out.sigma,
                phi: out.phi,
                u,
                exit_flow: out.exit_flow,
                cumulative_exits: cumulative,
            });
            state = out.next;
            k += 1;
        }
    }
    record.final_state = state;
    Ok(record)
}

/// Open-loop run with every ramp metered at the constant rate `u`.
pub fn run_fixed(scenario: &Scenario, u: f64) -> Result<RunRecord, RunError> {
    scenario
        .validate()
        .map_err(|e| RunError::Config(e.join("; ")))?;
    if !(0.0..=1.0).contains(&u) {
        return Err(RunError::Config(format!("metering rate {u} outside [0, 1]")));
    }
    let net = &scenario.network;
    let rates: Vec<f64> = net
        .ramps
        .iter()
        .map(|r| if r.present { u } else { 1.0 })
        .collect();
    let mut state = scenario.initial_state();
    let mut record = RunRecord {
        scenario: scenario.name.clone().unwrap_or_default(),
        controller: ControllerKind::None,
        rows: Vec::with_capacity(scenario.k),
        solves: Vec::new(),
        final_state: state.clone(),
    };
    let mut cumulative = 0.0;
    for k in 0..scenario.k {
        let out = match step(net, &state, &rates, scenario.lambda0_at(k), &scenario.lambda_at(k)) {
            Ok(out) => out,
            Err(source) => {
                record.final_state = state;
                return Err(RunError::Model {
                    step: k,
                    source,
                    partial: Box::new(record),
                });
            }
        };
        cumulative += out.exit_flow;
        record.rows.push(StepRow {
            k,
            x: state.x.clone(),
            r: state.r.clone(),
            sigma: out.sigma,
            phi: out.phi,
            u: rates.clone(),
            exit_flow: out.exit_flow,
            cumulative_exits: cumulative,
        });
        state = out.next;
    }
    record.final_state = state;
    Ok(record)
}

/// `%.9g`-style rendering: nine significant digits, trailing zeros trimmed,
/// exponent notation outside [1e-4, 1e9).
pub fn format_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim(&format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    }
}

fn csv_error(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

/// Per-step CSV with the fixed column order k, x_*, r_*, sigma_*, phi_*,
/// u_*, exit_flow, cumulative_exits.
pub fn write_record(record: &RunRecord, path: impl AsRef<Path>) -> std::io::Result<()> {
    let n = record.final_state.x.len();
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    let mut header = vec!["k".to_string()];
    for name in ["x", "r", "sigma", "phi", "u"] {
        header.extend((1..=n).map(|i| format!("{name}_{i}")));
    }
    header.push("exit_flow".into());
    header.push("cumulative_exits".into());
    w.write_record(&header).map_err(csv_error)?;
    for row in &record.rows {
        let mut fields = vec![row.k.to_string()];
        fields.extend(row.x.iter().map(|&v| format_sig(v)));
        fields.extend(row.r.iter().map(|&v| format_sig(v)));
        fields.extend(row.sigma.iter().map(|&s| (s as u8).to_string()));
        fields.extend(row.phi.iter().map(|&v| format_sig(v)));
        fields.extend(row.u.iter().map(|&v| format_sig(v)));
        fields.push(format_sig(row.exit_flow));
        fields.push(format_sig(row.cumulative_exits));
        w.write_record(&fields).map_err(csv_error)?;
    }
    w.flush()
}

/// Per-solve CSV: step, wall_time, nodes, objective, status.
pub fn write_solves(record: &RunRecord, path: impl AsRef<Path>) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(["step", "wall_time", "nodes", "objective", "status"])
        .map_err(csv_error)?;
    for s in &record.solves {
        w.write_record([
            s.step.to_string(),
            format_sig(s.wall_time),
            s.nodes.to_string(),
            s.objective.map(format_sig).unwrap_or_default(),
            s.status.name().to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()
}

pub fn write_summary(record: &RunRecord, path: impl AsRef<Path>) -> std::io::Result<()> {
    let mut f = File::create(path)?;
    let text = serde_json::to_string_pretty(&record.summary()).map_err(std::io::Error::other)?;
    writeln!(f, "{text}")
}
