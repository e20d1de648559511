//! Drift/martingale decomposition of the channel empirical measures, the
//! variance identities of the martingale part, and the path log-likelihood
//! against a uniform-rate reference chain.
//!
//! Everything here is post-processing of a [`StochTrajectory`]: the jump log
//! and the frozen site voltages are replayed substep by substep, so the
//! compensators are integrated on exactly the grid the simulator used.

use crate::deterministic::DetTrajectory;
use crate::error::{Error, Result};
use crate::grid::{Functional, Grid, GridFunction, NodalField};
use crate::kinetics::ChannelKinetics;
use crate::stochastic::{empirical_from_states, ChannelConfig, StochSample, StochTrajectory};

/// Per-channel running sums, row-major `channel × state`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ledger {
    pub states: Vec<usize>,
    num_states: usize,
    /// Jumps into `ξ` minus jumps out of `ξ`.
    pub jump_net: Vec<f64>,
    /// `∫ Σ_ζ (δ_{ξζ} - δ_{ξ,Ξ_s(i)}) α_{Ξ_s(i),ζ}(V_s(i/N)) ds`.
    pub compensator: Vec<f64>,
    /// `∫ Σ_ζ (δ_{ξζ} - δ_{ξ,Ξ_s(i)})² α_{Ξ_s(i),ζ}(V_s(i/N)) ds`.
    pub variance: Vec<f64>,
}

impl Ledger {
    fn new(states: Vec<usize>, num_states: usize) -> Self {
        let len = states.len() * num_states;
        Self {
            states,
            num_states,
            jump_net: vec![0.0; len],
            compensator: vec![0.0; len],
            variance: vec![0.0; len],
        }
    }

    fn accrue(&mut self, i: usize, state: usize, v: f64, span: f64, kinetics: &ChannelKinetics) {
        let exit = kinetics.exit_rate(state, v);
        let row = i * self.num_states;
        for xi in 0..self.num_states {
            let (drift, var) = if xi == state {
                (-exit, exit)
            } else {
                let a = kinetics.rate_unchecked(state, xi, v);
                (a, a)
            };
            self.compensator[row + xi] += span * drift;
            self.variance[row + xi] += span * var;
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn at(&self, channel: usize, xi: usize) -> (f64, f64, f64) {
        let k = channel * self.num_states + xi;
        (self.jump_net[k], self.compensator[k], self.variance[k])
    }
}

/// Replays `traj`, calling `visit` at every sample with the ledger as of that
/// sample time.
pub fn walk_ledger(
    traj: &StochTrajectory,
    kinetics: &ChannelKinetics,
    mut visit: impl FnMut(usize, &StochSample, &Ledger) -> Result<()>,
) -> Result<()> {
    if !traj.has_rate_history() {
        return Err(Error::MissingRateHistory);
    }
    let mut ledger = Ledger::new(traj.initial_states.clone(), kinetics.len());
    let mut samples = traj.samples.iter().enumerate().peekable();
    while let Some((idx, s)) = samples.next_if(|(_, s)| s.step == 0) {
        visit(idx, s, &ledger)?;
    }
    for k in 0..traj.steps() {
        let (t0, t1) = (traj.times[k], traj.times[k + 1]);
        let volts = traj.volts(k);
        for (i, &v) in volts.iter().enumerate() {
            let s = ledger.states[i];
            ledger.accrue(i, s, v, t1 - t0, kinetics);
        }
        for j in traj.substep_jumps(k) {
            let rest = t1 - j.time;
            let v = volts[j.channel];
            ledger.accrue(j.channel, j.from, v, -rest, kinetics);
            ledger.accrue(j.channel, j.to, v, rest, kinetics);
            let row = j.channel * ledger.num_states;
            ledger.jump_net[row + j.from] -= 1.0;
            ledger.jump_net[row + j.to] += 1.0;
            ledger.states[j.channel] = j.to;
        }
        while let Some((idx, s)) = samples.next_if(|(_, s)| s.step == k + 1) {
            visit(idx, s, &ledger)?;
        }
    }
    Ok(())
}

fn point_sum(grid: &Grid, positions: &[f64], n: u32, weight: impl Fn(usize) -> f64) -> Functional {
    let w = 1.0 / n as f64;
    let mut f = Functional::zero(grid);
    for (i, &x) in positions.iter().enumerate() {
        let c = weight(i);
        if c != 0.0 {
            f.add_point_mass_unchecked(x, w * c);
        }
    }
    f
}

/// `M_{ξ,t} = (1/N) Σ_i (jumps - compensator)_i δ_{i/N}` from a ledger.
pub fn martingale_functional(traj: &StochTrajectory, ledger: &Ledger, xi: usize) -> Functional {
    point_sum(&traj.grid, &traj.positions, traj.n, |i| {
        let (jn, comp, _) = ledger.at(i, xi);
        jn - comp
    })
}

/// `(1/N) Σ_i compensator_i δ_{i/N}`, the time-integrated channel part of
/// `Q_ξ`.
pub fn compensator_functional(traj: &StochTrajectory, ledger: &Ledger, xi: usize) -> Functional {
    point_sum(&traj.grid, &traj.positions, traj.n, |i| ledger.at(i, xi).1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MartingaleSeries {
    pub state: usize,
    pub times: Vec<f64>,
    pub values: Vec<Functional>,
}

impl MartingaleSeries {
    pub fn hminus1_norms(&self) -> Vec<f64> {
        self.values.iter().map(Functional::hminus1_norm).collect()
    }
}

pub fn martingale_series(traj: &StochTrajectory, xi: usize, kinetics: &ChannelKinetics) -> Result<MartingaleSeries> {
    let mut times = Vec::with_capacity(traj.samples.len());
    let mut values = Vec::with_capacity(traj.samples.len());
    walk_ledger(traj, kinetics, |_, s, ledger| {
        times.push(s.t);
        values.push(martingale_functional(traj, ledger, xi));
        Ok(())
    })?;
    Ok(MartingaleSeries { state: xi, times, values })
}

/// `⟨φ, M_{ξ,t}⟩` and the path value of the variance formula
/// `(1/N²) Σ_i φ(i/N)² ∫ Σ_ζ (δ_{ξζ} - δ_{ξ,Ξ_s(i)})² α ds` at every sample,
/// indexed `[ξ][sample]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MartingaleDiagnostics {
    pub times: Vec<f64>,
    pub pairing: Vec<Vec<f64>>,
    pub predicted_variance: Vec<Vec<f64>>,
}

pub fn martingale_diagnostics(
    traj: &StochTrajectory,
    phi: &GridFunction,
    kinetics: &ChannelKinetics,
) -> Result<MartingaleDiagnostics> {
    if phi.grid() != &traj.grid {
        return Err(Error::GridMismatch);
    }
    let weights: Vec<f64> = traj.positions.iter().map(|&x| phi.eval_unchecked(x)).collect();
    let n = traj.n as f64;
    let k = kinetics.len();
    let mut out = MartingaleDiagnostics {
        times: Vec::new(),
        pairing: vec![Vec::new(); k],
        predicted_variance: vec![Vec::new(); k],
    };
    walk_ledger(traj, kinetics, |_, s, ledger| {
        out.times.push(s.t);
        for xi in 0..k {
            let (mut m, mut var) = (0.0, 0.0);
            for (i, &w) in weights.iter().enumerate() {
                let (jn, comp, v) = ledger.at(i, xi);
                m += w * (jn - comp);
                var += w * w * v;
            }
            out.pairing[xi].push(m / n);
            out.predicted_variance[xi].push(var / (n * n));
        }
        Ok(())
    })?;
    Ok(out)
}

/// Path value of the variance formula at the horizon.
pub fn predicted_variance(
    traj: &StochTrajectory,
    phi: &GridFunction,
    xi: usize,
    kinetics: &ChannelKinetics,
) -> Result<f64> {
    let d = martingale_diagnostics(traj, phi, kinetics)?;
    Ok(d.predicted_variance[xi].last().copied().unwrap_or(0.0))
}

/// `8 ℓ α_max ‖φ‖²_∞ t / N`.
pub fn martingale_variance_bound(phi_sup: f64, t: f64, n: u32, half_length: f64, kinetics: &ChannelKinetics) -> f64 {
    8.0 * half_length * kinetics.alpha_max() * phi_sup * phi_sup * t / n as f64
}

/// Instantaneous drift `Q_ξ(Ξ, V)`: channel intensity deltas minus
/// `μ⌞det_drift`, with `det_drift` the proportion right-hand side of the
/// deterministic reference at the same time.
pub fn q_term(
    channels: &ChannelConfig,
    v: &GridFunction,
    xi: usize,
    kinetics: &ChannelKinetics,
    det_drift: &NodalField,
) -> Functional {
    let mut f = point_sum(v.grid(), channels.positions(), channels.n(), |i| {
        let s = channels.states[i];
        let vi = v.eval_unchecked(channels.positions()[i]);
        if s == xi {
            -kinetics.exit_rate(s, vi)
        } else {
            kinetics.rate_unchecked(s, xi, vi)
        }
    });
    f.add_scaled(&Functional::density(det_drift), -1.0);
    f
}

/// Largest `|lhs - rhs|` of
/// `⟨φ, C_ξ(Ξ_t) - μ⌞p_t⟩ = ⟨φ, C_ξ(Ξ_0) - μ⌞p_0⟩ + ⟨φ, ∫_0^t Q_ξ⟩ + ⟨φ, M_ξ,t⟩`
/// over all samples and states. The deterministic drift integrates to
/// `μ⌞(p_t - p_0)` on the shared time grid.
pub fn decomposition_residual(
    traj: &StochTrajectory,
    det: &DetTrajectory,
    phi: &GridFunction,
    kinetics: &ChannelKinetics,
) -> Result<f64> {
    check_aligned(traj, det)?;
    let grid = traj.grid;
    let k = kinetics.len();
    let empirical = |states: &[usize], xi: usize| empirical_from_states(&traj.positions, states, traj.n, xi, &grid);
    let p0 = &det.samples[0].p;
    let start: Vec<f64> = (0..k)
        .map(|xi| {
            let diff = &empirical(&traj.initial_states, xi) - &Functional::density(&p0[xi]);
            phi.pairing(&diff)
        })
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    walk_ledger(traj, kinetics, |idx, _, ledger| {
        let p = &det.samples[idx].p;
        for xi in 0..k {
            let lhs = phi.pairing(&(&empirical(&ledger.states, xi) - &Functional::density(&p[xi])))?;
            let mut drift = compensator_functional(traj, ledger, xi);
            drift.add_scaled(&Functional::density(&p[xi]), -1.0);
            drift.add_scaled(&Functional::density(&p0[xi]), 1.0);
            let q = phi.pairing(&drift)?;
            let m = phi.pairing(&martingale_functional(traj, ledger, xi))?;
            worst = worst.max((lhs - (start[xi] + q + m)).abs());
        }
        Ok(())
    })?;
    Ok(worst)
}

pub fn check_aligned(traj: &StochTrajectory, det: &DetTrajectory) -> Result<()> {
    if traj.samples.len() != det.samples.len()
        || traj.samples.iter().zip(&det.samples).any(|(a, b)| a.t != b.t)
    {
        return Err(Error::TimeGridMismatch);
    }
    if det.samples[0].v.grid() != &traj.grid {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// `log h` for the path in `traj` under `kinetics`, relative to the reference
/// chain in which each of the `count · (|E|-1)` possible single-channel
/// transitions fires at rate `r / (count · (|E|-1))`, so the total reference
/// rate is `r`. Rate factors are taken at the recorded jumps only.
pub fn path_log_likelihood(traj: &StochTrajectory, kinetics: &ChannelKinetics, reference_total_rate: f64) -> Result<f64> {
    if !traj.has_rate_history() {
        return Err(Error::MissingRateHistory);
    }
    if !(reference_total_rate > 0.0) {
        return Err(Error::Config(format!(
            "reference rate must be positive, got {reference_total_rate}"
        )));
    }
    let transitions = (traj.channel_count() * (kinetics.len() - 1)) as f64;
    let log_ref = (reference_total_rate / transitions).ln();
    let mut states = traj.initial_states.clone();
    let mut log_h = reference_total_rate * traj.horizon;
    for k in 0..traj.steps() {
        let (t0, t1) = (traj.times[k], traj.times[k + 1]);
        let volts = traj.volts(k);
        let total: f64 = states
            .iter()
            .zip(volts)
            .map(|(&s, &v)| kinetics.exit_rate(s, v))
            .sum();
        log_h -= (t1 - t0) * total;
        for j in traj.substep_jumps(k) {
            let v = volts[j.channel];
            let rest = t1 - j.time;
            log_h += rest * (kinetics.exit_rate(j.from, v) - kinetics.exit_rate(j.to, v));
            log_h += kinetics.rate(j.from, j.to, v)?.ln() - log_ref;
            states[j.channel] = j.to;
        }
    }
    Ok(log_h)
}
