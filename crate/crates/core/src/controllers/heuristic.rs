//! Hand-tuned metering: steer each ramp cell toward a target density that
//! keeps the downstream cells just below congestion, and starve the ramps
//! upstream of any congested cell until it clears.

use crate::model::{step, Network, NetworkState};

/// Target densities, back-propagated from the last cell sitting `margin`
/// below its congestion threshold. Cell 1 is not capped by its own
/// threshold since nothing upstream of it can be throttled.
pub fn target_densities(net: &Network, margin: f64) -> Vec<f64> {
    let n = net.len();
    let mut target = vec![0.0; n];
    target[n - 1] = net.cells[n - 1].x_hi - margin;
    for i in (0..n - 1).rev() {
        let cell = &net.cells[i];
        let next = &net.cells[i + 1];
        let feed = if cell.beta > 0.0 {
            next.v * target[i + 1] / (cell.beta * cell.v)
        } else {
            f64::INFINITY
        };
        let cap = cell.x_hi - margin;
        target[i] = if i == 0 { feed.min(cell.x_jam) } else { feed.min(cap) };
        if !target[i].is_finite() {
            target[i] = cap;
        }
    }
    target
}

/// Metering rates per cell (1 where no ramp exists).
pub fn heuristic_control(
    net: &Network,
    state: &NetworkState,
    lambda0: f64,
    lambda: &[f64],
    margin: f64,
) -> Vec<f64> {
    let n = net.len();
    let target = target_densities(net, margin);
    let mut u = vec![1.0; n];
    let blocked = (1..n).rev().find(|&i| state.sigma[i]);
    let idle = vec![0.0; n];
    let predicted = match step(net, state, &idle, lambda0, lambda) {
        Ok(out) => out.next.x,
        Err(_) => return u,
    };
    for i in 0..n {
        let ramp = &net.ramps[i];
        if !ramp.present {
            continue;
        }
        u[i] = if blocked.is_some_and(|b| i <= b) {
            0.0
        } else if ramp.c > 0.0 {
            ((target[i] - predicted[i]) / ramp.c).clamp(0.0, 1.0)
        } else {
            1.0
        };
    }
    u
}
