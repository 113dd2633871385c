mod common;

use capdrop::model::{step, CellParams, Network, NetworkState, RampParams};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn single_steps_hold_the_invariants(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        prop_assert_eq!(common::random_step_check(&mut rng), Ok(()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn trajectories_hold_the_invariants(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        prop_assert_eq!(common::random_trajectory_check(&mut rng), Ok(()));
    }

    #[test]
    fn flag_only_flips_at_the_thresholds(
        xs in prop::collection::vec(0.0..300.0f64, 1..120),
    ) {
        let cell = CellParams { v: 60.0, w: 20.0, x_jam: 320.0, x_hi: 110.0, x_lo: 70.0, beta: 1.0 };
        let net = Network { h: 1.0 / 120.0, cells: vec![cell], ramps: vec![RampParams::ABSENT] };
        let mut prev = false;
        for &x in &xs {
            let state = NetworkState { x: vec![x], r: vec![0.0], sigma: vec![prev] };
            let out = step(&net, &state, &[1.0], 0.0, &[0.0]).unwrap();
            let now = out.sigma[0];
            if now && !prev {
                prop_assert!(x >= cell.x_hi);
            }
            if !now && prev {
                prop_assert!(x <= cell.x_lo);
            }
            prev = now;
        }
    }
}

#[test]
fn band_keeps_the_previous_flag() {
    let cell = CellParams { v: 60.0, w: 20.0, x_jam: 320.0, x_hi: 110.0, x_lo: 70.0, beta: 0.9 };
    let net = Network {
        h: 1.0 / 120.0,
        cells: vec![cell, cell],
        ramps: vec![RampParams::ABSENT; 2],
    };
    for prev in [false, true] {
        let state = NetworkState { x: vec![50.0, 90.0], r: vec![0.0; 2], sigma: vec![false, prev] };
        let out = step(&net, &state, &[1.0; 2], 0.0, &[0.0; 2]).unwrap();
        assert_eq!(out.sigma[1], prev);
    }
}
