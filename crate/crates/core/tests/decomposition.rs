mod common;

use axon_core::config::default_scenario;
use axon_core::decomposition::{
    decomposition_residual, martingale_series, martingale_variance_bound, path_log_likelihood,
};
use axon_core::deterministic::run_det;
use axon_core::initial::ProportionInit;
use axon_core::stochastic::run_stoch;
use axon_core::validation::uniform_reference;
use axon_core::{ChannelKinetics, GridFunction};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pairing_identity_holds_on_random_runs(
        n in 3u32..30,
        seed in any::<u64>(),
        weights in prop::collection::vec(-2.0f64..2.0, 29),
    ) {
        let mut cfg = default_scenario();
        cfg.cells = 30;
        cfg.kinetics = common::three_state();
        cfg.initial.proportions = ProportionInit::Uniform { values: vec![0.4, 0.4, 0.2] };
        let k = cfg.kinetics().unwrap();
        let horizon = 0.3;
        let det = run_det(&cfg.initial_det_state().unwrap(), horizon, 0.01, &k).unwrap();
        let traj = run_stoch(&cfg.initial_stoch_state(n, seed).unwrap(), horizon, 0.01, &k, seed).unwrap();
        let grid = cfg.grid().unwrap();
        let phi = GridFunction::from_interior(grid, weights).unwrap();
        for phi in [grid.eigenfunction(1), grid.eigenfunction(2), phi] {
            prop_assert!(decomposition_residual(&traj, &det, &phi, &k).unwrap() <= 1e-10);
        }

        let series: Vec<_> = (0..3).map(|xi| martingale_series(&traj, xi, &k).unwrap()).collect();
        for s in 0..series[0].values.len() {
            let mut total = series[0].values[s].clone();
            total.add_scaled(&series[1].values[s], 1.0);
            total.add_scaled(&series[2].values[s], 1.0);
            prop_assert!(total.hminus1_norm() <= 1e-12);
        }
        for s in &series {
            prop_assert_eq!(s.values[0].hminus1_norm(), 0.0);
        }
    }

    #[test]
    fn reference_paths_have_unit_likelihood_under_themselves(seed in any::<u64>(), rate in 0.2f64..3.0) {
        let spec = common::three_state();
        let per = rate / 2.0;
        let reference = uniform_reference(ChannelKinetics::from_spec(&spec).unwrap().states(), per).unwrap();
        let mut cfg = default_scenario();
        cfg.cells = 8;
        cfg.kinetics = reference.to_spec();
        cfg.initial.proportions = ProportionInit::Uniform { values: vec![0.4, 0.4, 0.2] };
        let traj = run_stoch(&cfg.initial_stoch_state(1, seed).unwrap(), 1.0, 0.02, &reference, seed).unwrap();
        let ll = path_log_likelihood(&traj, &reference, rate).unwrap();
        prop_assert!(ll.abs() < 1e-12, "log-likelihood {}", ll);
    }
}

#[test]
fn variance_bound_formula() {
    let k = default_scenario().kinetics().unwrap();
    let b = martingale_variance_bound(1.0, 1.0, 100, 1.0, &k);
    assert!((b - 8.0 * 5.0 / 100.0).abs() < 1e-15);
    assert_eq!(martingale_variance_bound(1.0, 0.0, 100, 1.0, &k), 0.0);
}

#[test]
fn misaligned_trajectories_are_rejected() {
    let cfg = default_scenario();
    let k = cfg.kinetics().unwrap();
    let det = run_det(&cfg.initial_det_state().unwrap(), 0.1, 0.01, &k).unwrap();
    let traj = run_stoch(&cfg.initial_stoch_state(5, 1).unwrap(), 0.1, 0.005, &k, 1).unwrap();
    let phi = cfg.grid().unwrap().eigenfunction(1);
    assert!(decomposition_residual(&traj, &det, &phi, &k).is_err());
}
