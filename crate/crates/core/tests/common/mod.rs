//! Random instances and oracles shared by the integration tests and the
//! acceptance runner.
#![allow(dead_code)]

use capdrop::controllers::{build_ehmpc_with_columns, RolloutProblem, DEFAULT_DELTA_C};
use capdrop::model::{step, step_with_releases, CellParams, Network, NetworkState, RampParams};
use capdrop_solver::{solve_milp, MilpOptions, MilpStatus};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1.0 / 120.0;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_cell(rng: &mut impl Rng) -> CellParams {
    let x_jam = rng.gen_range(200.0..400.0);
    let x_hi = x_jam * rng.gen_range(0.3..0.5);
    CellParams {
        v: rng.gen_range(40.0..110.0),
        w: rng.gen_range(15.0..40.0),
        x_jam,
        x_hi,
        x_lo: x_hi * rng.gen_range(0.5..0.9),
        beta: rng.gen_range(0.75..1.0),
    }
}

/// `n` cells, a ramp at cell 0 and a coin flip for the others.
pub fn random_network(rng: &mut impl Rng, n: usize) -> Network {
    let cells = (0..n).map(|_| random_cell(rng)).collect();
    let ramps = (0..n)
        .map(|i| {
            if i == 0 || rng.gen_bool(0.5) {
                RampParams {
                    c: rng.gen_range(20.0..80.0),
                    present: true,
                }
            } else {
                RampParams::ABSENT
            }
        })
        .collect();
    Network { h: H, cells, ramps }
}

/// A state whose flags agree with the hysteresis rule; inside the band the
/// flag is random.
pub fn random_state(rng: &mut impl Rng, net: &Network) -> NetworkState {
    let x: Vec<f64> = net
        .cells
        .iter()
        .map(|c| rng.gen_range(0.0..0.85 * c.x_jam))
        .collect();
    let r = (0..net.len()).map(|_| rng.gen_range(0.0..150.0)).collect();
    let sigma = net
        .cells
        .iter()
        .zip(&x)
        .map(|(c, &x)| {
            if x >= c.x_hi {
                true
            } else if x <= c.x_lo {
                false
            } else {
                rng.gen_bool(0.5)
            }
        })
        .collect();
    NetworkState { x, r, sigma }
}

pub fn random_inflows(rng: &mut impl Rng, n: usize, t: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let lambda0 = (0..t).map(|_| rng.gen_range(0.0..60.0)).collect();
    let lambda = (0..t)
        .map(|_| (0..n).map(|_| rng.gen_range(0.0..60.0)).collect())
        .collect();
    (lambda0, lambda)
}

pub fn random_problem(rng: &mut impl Rng, n: usize, t: usize) -> RolloutProblem {
    let network = random_network(rng, n);
    let state = random_state(rng, &network);
    let (lambda0, lambda) = random_inflows(rng, n, t);
    RolloutProblem {
        network,
        state,
        horizon: t,
        lambda0,
        lambda,
        hint: None,
    }
}

/// Plant trajectory of a rollout under per-step releases.
pub struct Trajectory {
    /// `x[k]`, `r[k]` for k = 0..=T.
    pub x: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    /// `phi[k]`, `f[k]` for k = 0..T.
    pub phi: Vec<Vec<f64>>,
    pub f: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Σ(x + r) over k = 1..=T.
    pub fn objective(&self) -> f64 {
        self.x[1..]
            .iter()
            .chain(&self.r[1..])
            .flatten()
            .sum()
    }
}

pub fn simulate(prob: &RolloutProblem, releases: &[Vec<f64>]) -> Trajectory {
    let mut state = prob.state.clone();
    let mut traj = Trajectory {
        x: vec![state.x.clone()],
        r: vec![state.r.clone()],
        phi: Vec::new(),
        f: Vec::new(),
    };
    for k in 0..prob.horizon {
        let out = step_with_releases(&prob.network, &state, &releases[k], prob.lambda0[k], &prob.lambda[k])
            .expect("valid step");
        traj.phi.push(out.phi);
        traj.f.push(out.releases);
        state = out.next;
        traj.x.push(state.x.clone());
        traj.r.push(state.r.clone());
    }
    traj
}

/// Whether the exact encoding can represent the trajectory: receiving cells
/// stay clear of the `delta_c` guard bands below both thresholds and at or
/// below jam density.
pub fn encodable(net: &Network, traj: &Trajectory, delta_c: f64) -> bool {
    traj.x[1..].iter().all(|x| {
        (1..net.len()).all(|i| {
            let c = &net.cells[i];
            let near = |t: f64| x[i] > t - 2.0 * delta_c && x[i] < t + delta_c;
            !near(c.x_hi) && !near(c.x_lo) && x[i] <= c.x_jam
        })
    })
}

/// Solves the exact rollout with every release pinned to the simulated value
/// and returns the largest deviation of any density, queue or flow from the
/// simulation. `None` means the instance was not encodable.
pub fn exactness_error(prob: &RolloutProblem, releases: &[Vec<f64>]) -> Option<Result<f64, String>> {
    let traj = simulate(prob, releases);
    if !encodable(&prob.network, &traj, DEFAULT_DELTA_C) {
        return None;
    }
    let (mut mip, cols) = build_ehmpc_with_columns(prob, DEFAULT_DELTA_C).expect("valid rollout");
    for (k, row) in cols.f.iter().enumerate() {
        for (i, f) in row.iter().enumerate() {
            if let Some(j) = *f {
                mip.base.set_bounds(j, traj.f[k][i], traj.f[k][i]);
            }
        }
    }
    let sol = match solve_milp(&mip, &MilpOptions::default()) {
        Ok(sol) if sol.status == MilpStatus::Optimal => sol,
        Ok(sol) => return Some(Err(format!("status {:?}", sol.status))),
        Err(e) => return Some(Err(e.to_string())),
    };
    let mut worst: f64 = 0.0;
    for k in 0..prob.horizon {
        for i in 0..prob.network.len() {
            worst = worst
                .max((sol.x[cols.x[k][i]] - traj.x[k + 1][i]).abs())
                .max((sol.x[cols.r[k][i]] - traj.r[k + 1][i]).abs())
                .max((sol.x[cols.phi[k][i]] - traj.phi[k][i]).abs());
        }
    }
    Some(Ok(worst))
}

/// Random instance for the exactness oracle: N in {2, 3}, T in 1..=8,
/// releases from random metering rates. Regenerates until encodable.
pub fn exactness_case(rng: &mut impl Rng) -> Result<f64, String> {
    loop {
        let n = rng.gen_range(2..=3);
        let t = rng.gen_range(1..=8);
        let prob = random_problem(rng, n, t);
        let rates: Vec<Vec<f64>> = (0..t)
            .map(|_| (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect())
            .collect();
        let releases = releases_from_rates(&prob, &rates);
        if let Some(result) = exactness_error(&prob, &releases) {
            return result;
        }
    }
}

/// Releases the plant would make under metering rates `rates[k][i]`.
pub fn releases_from_rates(prob: &RolloutProblem, rates: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut state = prob.state.clone();
    let mut out = Vec::with_capacity(prob.horizon);
    for k in 0..prob.horizon {
        let o = step(&prob.network, &state, &rates[k], prob.lambda0[k], &prob.lambda[k]).expect("valid step");
        out.push(o.releases);
        state = o.next;
    }
    out
}

/// Brute force on a three-point release grid {0, c/2, c} for N = 2, T = 3.
/// Returns (solver optimum, grid optimum). Queues start deep enough that no
/// grid release is ever clipped.
pub fn grid_case(rng: &mut impl Rng) -> Result<(f64, f64), String> {
    const T: usize = 3;
    'retry: loop {
        let mut prob = random_problem(rng, 2, T);
        let net = &prob.network;
        for i in 0..2 {
            if net.ramps[i].present {
                prob.state.r[i] = 3.0 * net.ramps[i].c + rng.gen_range(0.0..50.0);
            }
        }
        let ramps = net.ramp_cells();
        let slots = ramps.len() * T;
        let mut best = f64::INFINITY;
        for code in 0..3usize.pow(slots as u32) {
            let mut releases = vec![vec![0.0; 2]; T];
            let mut c = code;
            for k in 0..T {
                for &i in &ramps {
                    releases[k][i] = (c % 3) as f64 * 0.5 * net.ramps[i].c;
                    c /= 3;
                }
            }
            let traj = simulate(&prob, &releases);
            if !encodable(net, &traj, DEFAULT_DELTA_C) {
                continue 'retry;
            }
            best = best.min(traj.objective());
        }
        let (mut mip, cols) = build_ehmpc_with_columns(&prob, DEFAULT_DELTA_C).map_err(|e| e.to_string())?;
        for k in 0..T {
            for &i in &ramps {
                let f = cols.f[k][i].expect("ramp column");
                let half = 0.5 * prob.network.ramps[i].c;
                let z1 = mip.add_binary(0.0);
                let z2 = mip.add_binary(0.0);
                mip.base.add_row(&[(f, 1.0), (z1, -half), (z2, -half)], 0.0, 0.0);
            }
        }
        let sol = solve_milp(&mip, &MilpOptions::default()).map_err(|e| e.to_string())?;
        if sol.status != MilpStatus::Optimal {
            return Err(format!("status {:?}", sol.status));
        }
        return Ok((sol.objective, best));
    }
}

/// Checks one plant step: nonnegativity, conservation, the hysteresis rule
/// and that a lower metering rate never shortens a queue.
pub fn check_step(
    net: &Network,
    state: &NetworkState,
    u: &[f64],
    lambda0: f64,
    lambda: &[f64],
) -> Result<NetworkState, String> {
    let out = step(net, state, u, lambda0, lambda).map_err(|e| e.to_string())?;
    let next = &out.next;
    if next.x.iter().chain(&next.r).chain(&out.phi).any(|&v| v < 0.0) {
        return Err(format!("negative quantity in {next:?} / {:?}", out.phi));
    }
    let before = state.vehicles() + lambda0 + lambda.iter().sum::<f64>();
    let after = next.vehicles() + out.exit_flow;
    if (before - after).abs() > 1e-9 * before.abs().max(1.0) {
        return Err(format!("vehicles {before} in, {after} accounted"));
    }
    let rule = |c: &CellParams, x: f64, prev: bool| {
        if x >= c.x_hi {
            true
        } else if x <= c.x_lo {
            false
        } else {
            prev
        }
    };
    for (i, c) in net.cells.iter().enumerate() {
        if out.sigma[i] != rule(c, state.x[i], state.sigma[i]) {
            return Err(format!("cell {i}: flag {} at x = {}", out.sigma[i], state.x[i]));
        }
        if next.sigma[i] != rule(c, next.x[i], out.sigma[i]) {
            return Err(format!("cell {i}: next flag {} at x = {}", next.sigma[i], next.x[i]));
        }
    }
    let shut: Vec<f64> = u.iter().map(|v| v * 0.5).collect();
    let slower = step(net, state, &shut, lambda0, lambda).map_err(|e| e.to_string())?;
    for i in 0..net.len() {
        if slower.next.r[i] < next.r[i] {
            return Err(format!("cell {i}: queue {} at u/2 below {} at u", slower.next.r[i], next.r[i]));
        }
    }
    Ok(out.next)
}

/// One random step from a random state.
pub fn random_step_check(rng: &mut impl Rng) -> Result<(), String> {
    let n = rng.gen_range(1..=5);
    let net = random_network(rng, n);
    let state = random_state(rng, &net);
    let u: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
    let (l0, l) = random_inflows(rng, n, 1);
    check_step(&net, &state, &u, l0[0], &l[0]).map(|_| ())
}

/// A random trajectory of up to 200 steps, checked step by step and replayed
/// for determinism.
pub fn random_trajectory_check(rng: &mut impl Rng) -> Result<(), String> {
    let n = rng.gen_range(1..=6);
    let net = random_network(rng, n);
    let start = random_state(rng, &net);
    let steps = rng.gen_range(1..=200);
    let inputs: Vec<(Vec<f64>, f64, Vec<f64>)> = (0..steps)
        .map(|_| {
            let u = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
            let (l0, l) = random_inflows(rng, n, 1);
            (u, l0[0], l[0].clone())
        })
        .collect();
    let mut state = start.clone();
    for (u, l0, l) in &inputs {
        state = check_step(&net, &state, u, *l0, l)?;
    }
    let mut again = start;
    for (u, l0, l) in &inputs {
        again = step(&net, &again, u, *l0, l).map_err(|e| e.to_string())?.next;
    }
    if again != state {
        return Err("replay diverged".into());
    }
    Ok(())
}
