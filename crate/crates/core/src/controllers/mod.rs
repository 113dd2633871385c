//! Ramp-metering strategies over a rollout horizon.

mod ehmpc;
mod heuristic;
mod rampc;
mod rollout;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use capdrop_solver::{
    solve_lp, solve_milp_with, LpStatus, MilpHooks, MilpOptions, MilpStatus, DEFAULT_TOL,
};
use serde::Serialize;
use thiserror::Error;

use crate::model::{step, step_with_releases, Network, NetworkState};
use crate::scenario::Scenario;

pub use ehmpc::{build_ehmpc, build_ehmpc_with_columns};
pub use heuristic::{heuristic_control, target_densities};
pub use rampc::{build_rampc, build_rampc_with_columns};
pub use rollout::RolloutColumns;

pub const DEFAULT_DELTA_C: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    None,
    Rampc,
    Ehmpc,
    #[serde(rename = "hc")]
    Heuristic,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 4] = [
        ControllerKind::None,
        ControllerKind::Rampc,
        ControllerKind::Heuristic,
        ControllerKind::Ehmpc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::None => "none",
            ControllerKind::Rampc => "rampc",
            ControllerKind::Ehmpc => "ehmpc",
            ControllerKind::Heuristic => "hc",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(ControllerKind::None),
            "rampc" => Ok(ControllerKind::Rampc),
            "ehmpc" => Ok(ControllerKind::Ehmpc),
            "hc" | "heuristic" => Ok(ControllerKind::Heuristic),
            other => Err(format!(
                "unknown controller '{other}' (expected none, rampc, ehmpc or hc)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    pub horizon: usize,
    /// Planned actions applied before the next solve.
    pub memory: usize,
    pub delta_c: f64,
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
    /// Branch-and-bound workers; 0 or 1 runs deterministically on one thread.
    pub threads: usize,
}

impl ControllerConfig {
    /// Defaults: relaxed MPC with horizon 51 and memory 1, hysteretic MPC with
    /// horizon 21 and memory 5, single-step rules otherwise.
    pub fn new(kind: ControllerKind) -> Self {
        let (horizon, memory) = match kind {
            ControllerKind::Rampc => (51, 1),
            ControllerKind::Ehmpc => (21, 5),
            ControllerKind::None | ControllerKind::Heuristic => (1, 1),
        };
        Self {
            kind,
            horizon,
            memory,
            delta_c: DEFAULT_DELTA_C,
            node_limit: MilpOptions::default().node_limit,
            time_limit: None,
            threads: 0,
        }
    }

    pub fn with_horizon(mut self, horizon: usize, memory: usize) -> Self {
        self.horizon = horizon;
        self.memory = memory;
        self
    }

    pub fn validate(&self, net: &Network) -> Result<(), String> {
        if self.horizon == 0 {
            return Err("horizon must be at least 1".into());
        }
        if self.memory == 0 || self.memory > self.horizon {
            return Err(format!(
                "memory = {} must lie in 1..={}",
                self.memory, self.horizon
            ));
        }
        let band = net
            .cells
            .iter()
            .map(|c| c.x_hi - c.x_lo)
            .fold(f64::INFINITY, f64::min);
        if !(self.delta_c > 0.0 && self.delta_c < band) {
            return Err(format!(
                "delta_c = {} must be positive and below the narrowest hysteresis band ({band})",
                self.delta_c
            ));
        }
        Ok(())
    }

    fn milp_options(&self) -> MilpOptions {
        MilpOptions {
            node_limit: self.node_limit,
            time_limit: self.time_limit,
            threads: self.threads,
            ..MilpOptions::default()
        }
    }
}

/// One rollout: the plant state now and the inflows over the next `horizon`
/// steps.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutProblem {
    pub network: Network,
    pub state: NetworkState,
    pub horizon: usize,
    pub lambda0: Vec<f64>,
    /// `lambda[k][i]`.
    pub lambda: Vec<Vec<f64>>,
    /// Optional release schedule `[k][i]` used to seed the search.
    pub hint: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("invalid rollout: {0}")]
    Invalid(String),
    #[error("measured congestion flags contradict the measured densities")]
    Inconsistent,
    #[error("solver failure: {0}")]
    Solver(String),
}

impl RolloutProblem {
    /// Rollout starting at step `k0` of a scenario; series are padded with
    /// their last value.
    pub fn from_scenario(
        scenario: &Scenario,
        state: NetworkState,
        k0: usize,
        horizon: usize,
    ) -> Self {
        Self {
            network: scenario.network.clone(),
            state,
            horizon,
            lambda0: scenario.lambda0.window(k0, horizon),
            lambda: (k0..k0 + horizon).map(|k| scenario.lambda_at(k)).collect(),
            hint: None,
        }
    }

    pub fn constant(
        network: Network,
        state: NetworkState,
        lambda0: f64,
        lambda: Vec<f64>,
        horizon: usize,
    ) -> Self {
        Self {
            network,
            state,
            horizon,
            lambda0: vec![lambda0; horizon],
            lambda: vec![lambda; horizon],
            hint: None,
        }
    }

    pub fn check(&self) -> Result<(), ControlError> {
        let n = self.network.len();
        let bad = |m: String| Err(ControlError::Invalid(m));
        if let Err(v) = self.network.validate() {
            return bad(v[0].to_string());
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.state.x.len() != n || self.state.r.len() != n || self.state.sigma.len() != n {
            return bad(format!("state dimensions do not match {n} cells"));
        }
        if self.lambda0.len() < self.horizon || self.lambda.len() < self.horizon {
            return bad("inflow series shorter than the horizon".into());
        }
        if self.lambda.iter().any(|row| row.len() != n) {
            return bad(format!("ramp inflows must have {n} entries per step"));
        }
        let values = self
            .state
            .x
            .iter()
            .chain(&self.state.r)
            .chain(&self.lambda0)
            .chain(self.lambda.iter().flatten());
        for v in values {
            if !(v.is_finite() && *v >= 0.0) {
                return bad(format!("negative or non-finite value {v}"));
            }
        }
        Ok(())
    }
}

/// Metering rates for the present onramps, one row per step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlPlan {
    /// Cell index of each column.
    pub ramps: Vec<usize>,
    pub u: Vec<Vec<f64>>,
}

impl ControlPlan {
    pub fn constant(net: &Network, value: f64, steps: usize) -> Self {
        let ramps = net.ramp_cells();
        Self {
            u: vec![vec![value; ramps.len()]; steps],
            ramps,
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Per-cell rates for one step; cells without a ramp get 1.
    pub fn cell_rates(&self, step: usize, n: usize) -> Vec<f64> {
        let mut out = vec![1.0; n];
        for (col, &i) in self.ramps.iter().enumerate() {
            out[i] = self.u[step][col];
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// No optimization involved.
    Rule,
    Optimal,
    NodeLimit,
    TimeLimit,
    /// The program had no feasible point; a simulated fallback was applied.
    Fallback,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Rule => "rule",
            SolveStatus::Optimal => "optimal",
            SolveStatus::NodeLimit => "node_limit",
            SolveStatus::TimeLimit => "time_limit",
            SolveStatus::Fallback => "fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Rollout objective Σ(x + r) of the applied plan, when one was optimized.
    pub objective: Option<f64>,
    pub best_bound: Option<f64>,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub wall_time: Duration,
    pub warning: Option<String>,
    /// Planned releases `[k][i]` over the whole horizon.
    #[serde(skip)]
    pub releases: Vec<Vec<f64>>,
    /// Planned densities `[k][i]`, k = 0..=T.
    #[serde(skip)]
    pub densities: Vec<Vec<f64>>,
}

impl SolveReport {
    fn rule(started: Instant) -> Self {
        Self {
            status: SolveStatus::Rule,
            objective: None,
            best_bound: None,
            nodes: 0,
            lp_iterations: 0,
            wall_time: started.elapsed(),
            warning: None,
            releases: Vec::new(),
            densities: Vec::new(),
        }
    }
}

/// Rates that reproduce planned releases: `f / c` where the queue is
/// non-empty, 1 (no restriction) otherwise.
fn recover_rates(net: &Network, releases: &[Vec<f64>], queues: &[Vec<f64>], steps: usize) -> ControlPlan {
    let ramps = net.ramp_cells();
    let u = (0..steps)
        .map(|k| {
            ramps
                .iter()
                .map(|&i| {
                    let c = net.ramps[i].c;
                    if c > 0.0 && queues[k][i] > 1e-9 {
                        (releases[k][i] / c).clamp(0.0, 1.0)
                    } else {
                        1.0
                    }
                })
                .collect()
        })
        .collect();
    ControlPlan { ramps, u }
}

/// Rolls a release schedule through the plant, returning the queues seen at
/// each step and the rollout objective Σ_{k=1..T}(Σx + Σr).
fn simulate_releases(prob: &RolloutProblem, releases: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
    let mut state = prob.state.clone();
    let mut queues = vec![state.r.clone()];
    let mut objective = 0.0;
    for k in 0..prob.horizon {
        match step_with_releases(&prob.network, &state, &releases[k], prob.lambda0[k], &prob.lambda[k]) {
            Ok(out) => state = out.next,
            Err(_) => return (queues, f64::INFINITY),
        }
        objective += state.vehicles();
        queues.push(state.r.clone());
    }
    (queues, objective)
}

/// Candidate release schedules: all open, all closed, each ramp (and all
/// ramps together) held shut for j steps then opened, the heuristic policy,
/// and the caller's hint.
fn seed_schedules(prob: &RolloutProblem, delta_c: f64) -> Vec<Vec<Vec<f64>>> {
    let net = &prob.network;
    let n = net.len();
    let t = prob.horizon;
    let full: Vec<f64> = net.ramps.iter().map(|r| r.c).collect();
    let ramps = net.ramp_cells();
    let mut seeds = vec![vec![full.clone(); t], vec![vec![0.0; n]; t]];
    let mut groups: Vec<Vec<usize>> = ramps.iter().map(|&i| vec![i]).collect();
    if ramps.len() > 1 {
        groups.push(ramps.clone());
        for cut in 1..ramps.len() {
            groups.push(ramps[..cut].to_vec());
        }
    }
    for group in &groups {
        for j in 1..t {
            let plan = (0..t)
                .map(|k| {
                    let mut row = full.clone();
                    if k < j {
                        for &i in group {
                            row[i] = 0.0;
                        }
                    }
                    row
                })
                .collect();
            seeds.push(plan);
        }
    }
    let mut state = prob.state.clone();
    let mut hc = Vec::with_capacity(t);
    for k in 0..t {
        let u = heuristic_control(net, &state, prob.lambda0[k], &prob.lambda[k], delta_c);
        match step(net, &state, &u, prob.lambda0[k], &prob.lambda[k]) {
            Ok(out) => {
                hc.push(out.releases);
                state = out.next;
            }
            Err(_) => break,
        }
    }
    if hc.len() == t {
        seeds.push(hc);
    }
    if let Some(hint) = &prob.hint {
        if let Some(last) = hint.last() {
            let plan = (0..t)
                .map(|k| hint.get(k).unwrap_or(last).clone())
                .collect();
            seeds.push(plan);
        }
    }
    seeds
}

fn plan_rampc(cfg: &ControllerConfig, prob: &RolloutProblem) -> Result<(ControlPlan, SolveReport), ControlError> {
    let started = Instant::now();
    let (lp, layout) = rampc::build(prob)?;
    let sol = solve_lp(&lp, DEFAULT_TOL).map_err(|e| ControlError::Solver(e.to_string()))?;
    if sol.status != LpStatus::Optimal {
        return Err(ControlError::Solver(format!(
            "relaxed rollout is {:?}",
            sol.status
        )));
    }
    let releases = layout.releases(&sol.x);
    let queues = layout.queues(&sol.x);
    let plan = recover_rates(&prob.network, &releases, &queues, cfg.memory);
    let report = SolveReport {
        status: SolveStatus::Optimal,
        objective: Some(sol.objective),
        best_bound: Some(sol.objective),
        nodes: 0,
        lp_iterations: sol.iterations,
        wall_time: started.elapsed(),
        warning: None,
        densities: layout.densities(&sol.x),
        releases,
    };
    Ok((plan, report))
}

fn plan_ehmpc(cfg: &ControllerConfig, prob: &RolloutProblem) -> Result<(ControlPlan, SolveReport), ControlError> {
    let started = Instant::now();
    let (mip, enc) = ehmpc::build(prob, cfg.delta_c)?;
    let schedules = seed_schedules(prob, cfg.delta_c);
    let initial = schedules.iter().map(|s| enc.complete(s)).collect();
    let heuristic = |point: &[f64]| Some(enc.complete(&enc.layout.releases(point)));
    let hooks = MilpHooks {
        initial,
        heuristic: Some(&heuristic),
    };
    let sol = solve_milp_with(&mip, &cfg.milp_options(), &hooks)
        .map_err(|e| ControlError::Solver(e.to_string()))?;
    let limit = match sol.status {
        MilpStatus::NodeLimit => Some(SolveStatus::NodeLimit),
        MilpStatus::TimeLimit => Some(SolveStatus::TimeLimit),
        _ => None,
    };
    if sol.has_incumbent() {
        let releases = enc.layout.releases(&sol.x);
        let queues = enc.layout.queues(&sol.x);
        let plan = recover_rates(&prob.network, &releases, &queues, cfg.memory);
        let warning = limit.map(|s| {
            format!(
                "{} reached after {} nodes; applying incumbent (objective {:.6}, bound {:.6})",
                s.name(),
                sol.nodes,
                sol.objective,
                sol.best_bound
            )
        });
        let report = SolveReport {
            status: limit.unwrap_or(SolveStatus::Optimal),
            objective: Some(sol.objective),
            best_bound: Some(sol.best_bound),
            nodes: sol.nodes,
            lp_iterations: sol.lp_iterations,
            wall_time: started.elapsed(),
            warning,
            densities: enc.layout.densities(&sol.x),
            releases,
        };
        return Ok((plan, report));
    }
    if limit.is_some() {
        return Err(ControlError::Solver(format!(
            "{:?} reached before any feasible rollout was found",
            sol.status
        )));
    }
    // Every schedule drives some state into a guard band; fall back to the
    // best schedule under the plant's own dynamics.
    let (best, queues, objective) = schedules
        .into_iter()
        .map(|s| {
            let (q, obj) = simulate_releases(prob, &s);
            (s, q, obj)
        })
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .expect("at least two seed schedules");
    let plan = recover_rates(&prob.network, &best, &queues, cfg.memory);
    let report = SolveReport {
        status: SolveStatus::Fallback,
        objective: Some(objective),
        best_bound: None,
        nodes: sol.nodes,
        lp_iterations: sol.lp_iterations,
        wall_time: started.elapsed(),
        warning: Some("hysteretic rollout infeasible within the delta_c guard bands; applied best simulated schedule".into()),
        densities: Vec::new(),
        releases: best,
    };
    Ok((plan, report))
}

fn plan_heuristic(cfg: &ControllerConfig, prob: &RolloutProblem) -> Result<(ControlPlan, SolveReport), ControlError> {
    let started = Instant::now();
    prob.check()?;
    let net = &prob.network;
    let ramps = net.ramp_cells();
    let mut state = prob.state.clone();
    let mut u = Vec::with_capacity(cfg.memory);
    for k in 0..cfg.memory {
        let lam0 = prob.lambda0[k.min(prob.lambda0.len() - 1)];
        let lam = &prob.lambda[k.min(prob.lambda.len() - 1)];
        let rates = heuristic_control(net, &state, lam0, lam, cfg.delta_c);
        u.push(ramps.iter().map(|&i| rates[i]).collect());
        state = step(net, &state, &rates, lam0, lam)
            .map_err(|e| ControlError::Invalid(e.to_string()))?
            .next;
    }
    Ok((ControlPlan { ramps, u }, SolveReport::rule(started)))
}

/// Plans `cfg.memory` steps of metering for the rollout `prob`.
pub fn plan(cfg: &ControllerConfig, prob: &RolloutProblem) -> Result<(ControlPlan, SolveReport), ControlError> {
    cfg.validate(&prob.network).map_err(ControlError::Invalid)?;
    if prob.horizon < cfg.memory {
        return Err(ControlError::Invalid(format!(
            "rollout horizon {} shorter than memory {}",
            prob.horizon, cfg.memory
        )));
    }
    match cfg.kind {
        ControllerKind::None => {
            prob.check()?;
            Ok((
                ControlPlan::constant(&prob.network, 1.0, cfg.memory),
                SolveReport::rule(Instant::now()),
            ))
        }
        ControllerKind::Heuristic => plan_heuristic(cfg, prob),
        ControllerKind::Rampc => plan_rampc(cfg, prob),
        ControllerKind::Ehmpc => plan_ehmpc(cfg, prob),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::{CellParams, RampParams};

    pub(crate) fn two_cell_net() -> Network {
        let cell = |beta| CellParams {
            v: 60.0,
            w: 20.0,
            x_jam: 320.0,
            x_hi: 110.0,
            x_lo: 70.0,
            beta,
        };
        Network {
            h: 1.0 / 120.0,
            cells: vec![cell(0.9), cell(1.0)],
            ramps: vec![
                RampParams {
                    c: 60.0,
                    present: true,
                },
                RampParams::ABSENT,
            ],
        }
    }

    pub(crate) fn prop1_problem(horizon: usize) -> RolloutProblem {
        let net = two_cell_net();
        let state = NetworkState::initial(&net, vec![0.0, 150.0], vec![0.0, 0.0]);
        RolloutProblem::constant(net, state, 30.0, vec![80.0, 0.0], horizon)
    }

    #[test]
    fn kinds_parse() {
        assert_eq!("HC".parse::<ControllerKind>(), Ok(ControllerKind::Heuristic));
        assert!("mpc".parse::<ControllerKind>().is_err());
        for k in ControllerKind::ALL {
            assert_eq!(k.name().parse::<ControllerKind>(), Ok(k));
        }
    }

    #[test]
    fn none_opens_every_ramp() {
        let cfg = ControllerConfig::new(ControllerKind::None).with_horizon(4, 3);
        let (plan, report) = plan(&cfg, &prop1_problem(4)).unwrap();
        assert_eq!(plan.u, vec![vec![1.0]; 3]);
        assert_eq!(report.status, SolveStatus::Rule);
    }

    #[test]
    fn config_validation() {
        let net = two_cell_net();
        let mut cfg = ControllerConfig::new(ControllerKind::Ehmpc);
        assert!(cfg.validate(&net).is_ok());
        cfg.memory = 22;
        assert!(cfg.validate(&net).is_err());
        cfg.memory = 1;
        cfg.delta_c = 50.0;
        assert!(cfg.validate(&net).is_err());
    }

    #[test]
    fn recovered_rates_lie_in_unit_interval() {
        let prob = prop1_problem(8);
        for kind in [ControllerKind::Rampc, ControllerKind::Ehmpc] {
            let cfg = ControllerConfig::new(kind).with_horizon(8, 8);
            let (plan, _) = plan(&cfg, &prob).unwrap();
            assert_eq!(plan.len(), 8);
            assert!(plan.u.iter().flatten().all(|u| (0.0..=1.0).contains(u)));
        }
    }

    // With the downstream cell uncongested the exact flow is the full
    // demand, which the relaxation caps at supply. The relaxation therefore
    // does not bound the exact rollout here.
    #[test]
    fn free_downstream_breaks_the_relaxation_bound() {
        let prob = prop1_problem(10);
        let lp = build_rampc(&prob).unwrap();
        let relaxed = solve_lp(&lp, DEFAULT_TOL).unwrap().objective;
        let cfg = ControllerConfig::new(ControllerKind::Ehmpc).with_horizon(10, 1);
        let (_, report) = plan(&cfg, &prob).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        let exact = report.objective.unwrap();
        assert!((relaxed - 5006.08).abs() < 0.01, "{relaxed}");
        assert!((exact - 4633.58).abs() < 0.01, "{exact}");
    }
}
