#![allow(dead_code)]

use axon_core::kinetics::{ChannelState, RateSpec};
use axon_core::KineticsSpec;

fn state(name: &str, c: f64, v: f64) -> ChannelState {
    ChannelState {
        name: name.into(),
        conductance: c,
        driving_potential: v,
    }
}

fn rate(from: &str, to: &str, form: &str, params: &[f64]) -> RateSpec {
    RateSpec {
        from: from.into(),
        to: to.into(),
        form: form.into(),
        params: params.to_vec(),
    }
}

/// Three states with one rate of each form.
pub fn three_state() -> KineticsSpec {
    KineticsSpec {
        states: vec![state("rest", 0.0, -0.5), state("mid", 0.5, 0.2), state("open", 1.0, 1.0)],
        rates: vec![
            rate("rest", "mid", "sigmoid", &[0.1, 2.0, 5.0, 0.0]),
            rate("mid", "rest", "constant", &[0.7]),
            rate("mid", "open", "exp_clamped", &[1.0, 2.0]),
            rate("open", "mid", "sigmoid", &[0.2, 1.5, -3.0, 0.4]),
            rate("open", "rest", "constant", &[0.3]),
            rate("rest", "open", "constant", &[0.15]),
        ],
        clamp: [0.05, 4.0],
    }
}

/// Voltage-independent two-state chain with opening rate `a` and closing
/// rate `b`.
pub fn constant_two_state(a: f64, b: f64, c_open: f64) -> KineticsSpec {
    KineticsSpec {
        states: vec![state("closed", 0.0, -0.2), state("open", c_open, 1.0)],
        rates: vec![
            rate("closed", "open", "constant", &[a]),
            rate("open", "closed", "constant", &[b]),
        ],
        clamp: [a.min(b) * 0.5, a.max(b) * 2.0],
    }
}
