//! Randomized cross-checks against brute-force oracles.

use capdrop_solver::{
    solve_lp, solve_milp, IndicatorConstraint, LinearProgram, LpStatus, MilpOptions, MilpStatus,
    MixedIntegerProgram, Sense, DEFAULT_TOL,
};
use proptest::prelude::*;

mod support;

use support::{binary_enumeration, vertex_enumeration};

const INF: f64 = f64::INFINITY;

fn coeff() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), (-5i32..=5).prop_map(|v| v as f64), -4.0..4.0f64]
}

fn bounded_lp() -> impl Strategy<Value = LinearProgram> {
    (1usize..=6, 1usize..=6).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(coeff(), n),
            prop::collection::vec((-5.0..0.0f64, 0.0..5.0f64), n),
            prop::collection::vec(prop::collection::vec(coeff(), n), m),
            prop::collection::vec((-6.0..2.0f64, 0u8..3, 0.0..6.0f64), m),
        )
            .prop_map(|(cost, bounds, rows, row_bounds)| {
                let mut lp = LinearProgram::new();
                for (c, (lo, hi)) in cost.into_iter().zip(bounds) {
                    lp.add_var(c, lo, hi);
                }
                for (row, (lo, kind, width)) in rows.into_iter().zip(row_bounds) {
                    let coeffs: Vec<(usize, f64)> = row.into_iter().enumerate().collect();
                    let (rlo, rhi) = match kind {
                        0 => (lo, INF),
                        1 => (-INF, lo + width),
                        _ => (lo, lo + width),
                    };
                    lp.add_row(&coeffs, rlo, rhi);
                }
                lp
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn lp_matches_vertex_enumeration(lp in bounded_lp()) {
        let sol = solve_lp(&lp, DEFAULT_TOL).unwrap();
        match vertex_enumeration(&lp) {
            Some(best) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective - best).abs() <= 1e-6 * best.abs().max(1.0),
                    "simplex {} vs enumeration {}", sol.objective, best);
                prop_assert!(lp.max_violation(&sol.x) <= DEFAULT_TOL * 10.0);
                prop_assert!((sol.objective - lp.objective_at(&sol.x)).abs() <= 1e-9);
            }
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
        }
    }
}

fn random_mip() -> impl Strategy<Value = MixedIntegerProgram> {
    (1usize..=12, 0usize..=6, 1usize..=5, 0usize..=4).prop_flat_map(|(nb, nc, m, ni)| {
        let nv = nb + nc;
        (
            prop::collection::vec(coeff(), nv),
            prop::collection::vec((-3.0..0.0f64, 0.5..4.0f64), nc),
            prop::collection::vec(prop::collection::vec(coeff(), nv), m),
            prop::collection::vec((-4.0..4.0f64, 0u8..3), m),
            prop::collection::vec(
                (0..nb, any::<bool>(), prop::collection::vec(coeff(), nv), 0u8..3, -3.0..3.0f64),
                ni,
            ),
        )
            .prop_map(move |(cost, cbounds, rows, row_bounds, inds)| {
                let mut mip = MixedIntegerProgram::default();
                for c in &cost[..nb] {
                    mip.add_binary(*c);
                }
                for (c, (lo, hi)) in cost[nb..].iter().zip(cbounds) {
                    mip.base.add_var(*c, lo, hi);
                }
                for (row, (b, kind)) in rows.into_iter().zip(row_bounds) {
                    let coeffs: Vec<(usize, f64)> = row.into_iter().enumerate().collect();
                    let (lo, hi) = match kind {
                        0 => (-INF, b + 2.0),
                        1 => (b - 2.0, INF),
                        _ => (b - 2.0, b + 2.0),
                    };
                    mip.base.add_row(&coeffs, lo, hi);
                }
                for (binary, active_when, row, kind, rhs) in inds {
                    let coeffs: Vec<(usize, f64)> = row.into_iter().enumerate().collect();
                    let sense = match kind {
                        0 => Sense::Le,
                        1 => Sense::Ge,
                        _ => Sense::Eq,
                    };
                    mip.indicators.push(IndicatorConstraint {
                        binary,
                        active_when,
                        coeffs,
                        sense,
                        rhs,
                    });
                }
                mip
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn milp_matches_binary_enumeration(mip in random_mip()) {
        let sol = solve_milp(&mip, &MilpOptions::default()).unwrap();
        match binary_enumeration(&mip) {
            Some(best) => {
                prop_assert_eq!(sol.status, MilpStatus::Optimal);
                prop_assert!((sol.objective - best).abs() <= 1e-6 * best.abs().max(1.0),
                    "branch and bound {} vs enumeration {}", sol.objective, best);
                prop_assert!(sol.root_bound <= sol.objective + 1e-6);
                prop_assert!(sol.best_bound <= sol.objective + 1e-6);
                for &b in &mip.binaries {
                    prop_assert!((sol.x[b] - sol.x[b].round()).abs() <= 1e-6);
                }
            }
            None => prop_assert_eq!(sol.status, MilpStatus::Infeasible),
        }
    }

    #[test]
    fn parallel_search_agrees_on_objective(mip in random_mip()) {
        let serial = solve_milp(&mip, &MilpOptions::default()).unwrap();
        let parallel = solve_milp(&mip, &MilpOptions { threads: 3, ..MilpOptions::default() }).unwrap();
        prop_assert_eq!(serial.status, parallel.status);
        if serial.status == MilpStatus::Optimal {
            prop_assert!((serial.objective - parallel.objective).abs() <= 1e-6 * serial.objective.abs().max(1.0));
        }
        let again = solve_milp(&mip, &MilpOptions::default()).unwrap();
        prop_assert_eq!(serial.x, again.x);
    }
}
