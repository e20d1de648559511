mod common;

use axon_core::config::{default_scenario, InitialSpec, RunConfig};
use axon_core::deterministic::{run_det, DeterministicState};
use axon_core::initial::{ProportionInit, VoltageInit};
use axon_core::semigroup::{apply_semigroup, KernelParams};
use axon_core::validation::zero_conductance;
use axon_core::ChannelKinetics;
use proptest::prelude::*;

fn small_config(kinetics: axon_core::KineticsSpec, voltage: VoltageInit, proportions: ProportionInit) -> RunConfig {
    RunConfig {
        cells: 40,
        horizon: 0.2,
        dt: 0.01,
        kinetics,
        initial: InitialSpec { voltage, proportions },
        ..default_scenario()
    }
}

fn simplex(w: &[f64]) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    let mut p: Vec<f64> = w.iter().map(|x| x / total).collect();
    let head: f64 = p[..p.len() - 1].iter().sum();
    *p.last_mut().unwrap() = 1.0 - head;
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn invariants_hold_for_random_data(
        amplitude in -1.5f64..1.5,
        center in -0.5f64..0.5,
        width in 0.1f64..0.6,
        wl in prop::collection::vec(0.05f64..1.0, 3),
        wr in prop::collection::vec(0.05f64..1.0, 3),
    ) {
        let cfg = small_config(
            common::three_state(),
            VoltageInit::Gaussian { amplitude, center, width },
            ProportionInit::Logistic { left: simplex(&wl), right: simplex(&wr), center: 0.0, steepness: 6.0 },
        );
        let k = cfg.kinetics().unwrap();
        let init = cfg.initial_det_state().unwrap();
        let traj = run_det(&init, cfg.horizon, cfg.dt, &k).unwrap();
        prop_assert!(traj.max_sum_defect() <= 1e-12);
        for s in &traj.samples {
            for f in &s.p {
                prop_assert!(f.values().iter().all(|&x| (-1e-9..=1.0 + 1e-9).contains(&x)));
            }
        }
        let dis: Vec<f64> = traj.samples.iter().map(|s| s.dissipation).collect();
        prop_assert!(dis.windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn voltage_independent_proportions_relax_in_closed_form() {
    let (a, b) = (1.3, 0.4);
    let cfg = small_config(
        common::constant_two_state(a, b, 0.8),
        VoltageInit::Eigenfunction { amplitude: 0.3, mode: 1 },
        ProportionInit::Logistic {
            left: vec![0.9, 0.1],
            right: vec![0.2, 0.8],
            center: 0.1,
            steepness: 3.0,
        },
    );
    let k = cfg.kinetics().unwrap();
    let init = cfg.initial_det_state().unwrap();
    let traj = run_det(&init, 1.0, 0.01, &k).unwrap();
    let last = traj.last();
    let pi = a / (a + b);
    for (j, p0) in init.p[1].values().iter().enumerate() {
        let want = pi + (p0 - pi) * (-(a + b) * last.t).exp();
        assert!((last.p[1].values()[j] - want).abs() < 1e-9);
    }
}

#[test]
fn zero_conductance_follows_the_heat_kernel() {
    let mut cfg = small_config(
        zero_conductance(&common::three_state()),
        VoltageInit::Gaussian { amplitude: 1.0, center: 0.2, width: 0.3 },
        ProportionInit::Uniform { values: vec![0.2, 0.3, 0.5] },
    );
    cfg.cells = 400;
    let k = cfg.kinetics().unwrap();
    let init = cfg.initial_det_state().unwrap();
    let traj = run_det(&init, 0.1, 1e-3, &k).unwrap();
    let exact = apply_semigroup(0.1, &init.v, &KernelParams::new(1.0)).unwrap();
    let err = (&traj.last().v - &exact).l2_norm() / exact.l2_norm();
    assert!(err < 1e-3, "relative error {err}");
}

#[test]
fn second_order_in_time() {
    let cfg = default_scenario();
    let k = cfg.kinetics().unwrap();
    let init = cfg.initial_det_state().unwrap();
    let run = |dt: f64| run_det(&init, 0.4, dt, &k).unwrap().last().v.clone();
    let (a, b, c) = (run(0.02), run(0.01), run(0.005));
    let ratio = (&a - &b).l2_norm() / (&b - &c).l2_norm();
    assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn rejects_unstable_steps_and_bad_states() {
    let cfg = default_scenario();
    let k: ChannelKinetics = cfg.kinetics().unwrap();
    let init = cfg.initial_det_state().unwrap();
    assert!(run_det(&init, 1.0, 0.2, &k).is_err());
    let mut p = init.p.clone();
    p[0].values_mut()[5] = 0.9;
    let bad = DeterministicState::new(init.v.clone(), p).unwrap();
    assert!(bad.validate(&k).is_err());
}
