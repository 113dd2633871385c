//! Linear and mixed-integer linear programming for the ramp-metering controllers.
//!
//! [`lp`] holds a dense bounded-variable primal simplex. [`milp`] runs a
//! branch-and-bound search over designated binary variables on top of it,
//! warm-starting every node from the previous tableau with the dual simplex.

pub mod lp;
pub mod milp;
mod simplex;

pub use lp::{solve_lp, LinearProgram, LpError, LpSolution, LpStatus, DEFAULT_TOL};
pub use milp::{
    solve_milp, solve_milp_with, IndicatorConstraint, MilpError, MilpHooks, MilpOptions,
    MilpSolution, MilpStatus, MixedIntegerProgram, NodeHeuristic, Sense,
};
