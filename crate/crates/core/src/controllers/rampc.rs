//! Rollout that ignores capacity drop: every flow is limited by both demand
//! and downstream supply, whatever the congestion state.

use capdrop_solver::LinearProgram;

use super::rollout::{Expr, Layout, RolloutColumns, Term};
use super::{ControlError, RolloutProblem};
use crate::model::{demand, supply};

pub(crate) fn build(prob: &RolloutProblem) -> Result<(LinearProgram, Layout), ControlError> {
    prob.check()?;
    let net = &prob.network;
    let n = net.len();
    let mut lp = LinearProgram::new();
    let layout = Layout::build(prob, &mut lp, |layout, k, i| {
        let cell = &net.cells[i];
        if k > 0 {
            return (0.0, demand(cell, layout.x_hi[k][i]));
        }
        let x = &prob.state.x;
        let mut hi = demand(cell, x[i]);
        if i + 1 < n && cell.beta > 0.0 {
            hi = hi.min(supply(&net.cells[i + 1], x[i + 1]) / cell.beta);
        }
        (0.0, hi.max(0.0))
    });
    for k in 1..prob.horizon {
        for i in 0..n {
            let cell = &net.cells[i];
            let phi = Term::Var(layout.phi[k][i]);
            let e = Expr::default().add(phi, 1.0).add(layout.xt(k, i), -cell.v);
            Layout::add_row(&mut lp, e, f64::NEG_INFINITY, 0.0);
            if i + 1 < n && cell.beta > 0.0 {
                let next = &net.cells[i + 1];
                let e = Expr::default()
                    .add(phi, cell.beta)
                    .add(layout.xt(k, i + 1), next.w);
                Layout::add_row(&mut lp, e, f64::NEG_INFINITY, next.w * next.x_jam);
            }
        }
    }
    Ok((lp, layout))
}

/// The relaxed rollout as a linear program.
pub fn build_rampc(prob: &RolloutProblem) -> Result<LinearProgram, ControlError> {
    build(prob).map(|(lp, _)| lp)
}

/// Like [`build_rampc`], also returning where the rollout variables live.
pub fn build_rampc_with_columns(
    prob: &RolloutProblem,
) -> Result<(LinearProgram, RolloutColumns), ControlError> {
    build(prob).map(|(lp, layout)| (lp, layout.columns()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::tests::{prop1_problem, two_cell_net};
    use crate::model::NetworkState;
    use capdrop_solver::{solve_lp, LpStatus, DEFAULT_TOL};

    #[test]
    fn variable_count() {
        let mut prob = prop1_problem(1);
        prob.state = NetworkState::zeros(2);
        let lp = build_rampc(&prob).unwrap();
        assert_eq!(lp.num_vars(), 7);
    }

    #[test]
    fn empty_system_costs_nothing() {
        let net = two_cell_net();
        let prob = RolloutProblem::constant(net, NetworkState::zeros(2), 0.0, vec![0.0; 2], 4);
        let lp = build_rampc(&prob).unwrap();
        let sol = solve_lp(&lp, DEFAULT_TOL).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.objective.abs() < 1e-9);
        assert!(sol.x.iter().all(|v| v.abs() < 1e-9));
    }
}
