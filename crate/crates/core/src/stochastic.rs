//! Integrator for the stochastic model: the cable PDE driven by `1/N`-weighted
//! Dirac sources at the channel sites `i/N`, coupled to per-channel Markov
//! jumps.
//!
//! Rates are frozen at the start of each substep at `V(t, i/N)`. Each channel
//! then runs the frozen-rate chain exactly over the substep, and the PDE is
//! advanced by Crank–Nicolson sub-solves between consecutive conductance
//! changes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::deterministic::{check_stability, dissipation_bound, time_grid};
use crate::error::{Error, Result};
use crate::fem::{self, CrankNicolson};
use crate::grid::{Functional, Grid, GridFunction, NodalField};
use crate::kinetics::ChannelKinetics;
use crate::linalg::SymTridiag;
use crate::rng;

/// Rate-freezing guard: `Δt (|E|-1) α_max ≤ 0.2`.
pub const STOCH_STABILITY_LIMIT: f64 = 0.2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    #[default]
    Stratified,
    Iid,
}

/// Sites `i/N` for every integer `i` with `-Nℓ < i < Nℓ`.
pub fn channel_positions(n: u32, half_length: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::NoChannels(n));
    }
    let nl = n as f64 * half_length;
    let nearest = nl.round();
    let top = if (nl - nearest).abs() <= 1e-9 * nl.max(1.0) {
        nearest as i64 - 1
    } else {
        nl.floor() as i64
    };
    if top < 0 {
        return Err(Error::NoChannels(n));
    }
    Ok((-top..=top).map(|i| i as f64 / n as f64).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelConfig {
    n: u32,
    positions: Vec<f64>,
    pub states: Vec<usize>,
}

impl ChannelConfig {
    pub fn new(n: u32, half_length: f64, states: Vec<usize>) -> Result<Self> {
        let positions = channel_positions(n, half_length)?;
        if states.len() != positions.len() {
            return Err(Error::Config(format!(
                "{} states for {} channels",
                states.len(),
                positions.len()
            )));
        }
        Ok(Self { n, positions, states })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn counts(&self, num_states: usize) -> Vec<usize> {
        let mut c = vec![0; num_states];
        for &s in &self.states {
            c[s] += 1;
        }
        c
    }
}

/// Initial channel states drawn from the proportion fields `p0`.
///
/// Stratified mode walks the sites left to right and gives each one the state
/// with the largest deficit `Σ_{j ≤ i} p_ξ(x_j) - #{j < i : Ξ(j) = ξ}`;
/// ties go to the lowest index. Iid mode samples each site independently
/// from the reserved initialisation stream of `seed`.
pub fn init_channels(
    n: u32,
    half_length: f64,
    p0: &[NodalField],
    mode: InitMode,
    seed: u64,
) -> Result<ChannelConfig> {
    let positions = channel_positions(n, half_length)?;
    let k = p0.len();
    let mut states = Vec::with_capacity(positions.len());
    let mut local = vec![0.0; k];
    match mode {
        InitMode::Stratified => {
            let mut deficit = vec![0.0; k];
            for &x in &positions {
                for (d, f) in deficit.iter_mut().zip(p0) {
                    *d += f.eval_at(x)?;
                }
                let mut best = 0;
                for xi in 1..k {
                    if deficit[xi] > deficit[best] {
                        best = xi;
                    }
                }
                deficit[best] -= 1.0;
                states.push(best);
            }
        }
        InitMode::Iid => {
            let mut r = rng::stream(seed, rng::INIT_STREAM);
            for &x in &positions {
                for (l, f) in local.iter_mut().zip(p0) {
                    *l = f.eval_at(x)?;
                }
                states.push(pick(&local, r.random::<f64>()));
            }
        }
    }
    Ok(ChannelConfig { n, positions, states })
}

/// Index `ζ` with `Σ_{η<ζ} w_η ≤ u·Σw < Σ_{η≤ζ} w_η`, skipping zero weights.
fn pick(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if target < acc {
                return i;
            }
        }
    }
    last
}

/// `C_{ξ,N}(Ξ) = (1/N) Σ_{Ξ(i) = ξ} δ_{i/N}`.
pub fn empirical_distribution(channels: &ChannelConfig, xi: usize, grid: &Grid) -> Functional {
    empirical_from_states(&channels.positions, &channels.states, channels.n, xi, grid)
}

pub(crate) fn empirical_from_states(positions: &[f64], states: &[usize], n: u32, xi: usize, grid: &Grid) -> Functional {
    let w = 1.0 / n as f64;
    let mut f = Functional::zero(grid);
    for (&x, &s) in positions.iter().zip(states) {
        if s == xi {
            f.add_point_mass_unchecked(x, w);
        }
    }
    f
}

/// `(1/N) Σ_i c_{Ξ(i)} (v_{Ξ(i)} - V(i/N)) δ_{i/N}`.
pub fn channel_source(channels: &ChannelConfig, v: &GridFunction, kinetics: &ChannelKinetics) -> Functional {
    let w = 1.0 / channels.n as f64;
    let mut f = Functional::zero(v.grid());
    for (&x, &s) in channels.positions.iter().zip(&channels.states) {
        let c = kinetics.conductance(s);
        if c != 0.0 {
            let drive = kinetics.driving_potential(s) - v.eval_unchecked(x);
            f.add_point_mass_unchecked(x, w * c * drive);
        }
    }
    f
}

#[derive(Clone, Debug, PartialEq)]
pub struct StochasticState {
    pub t: f64,
    pub v: GridFunction,
    pub channels: ChannelConfig,
}

impl StochasticState {
    pub fn new(v: GridFunction, channels: ChannelConfig) -> Result<Self> {
        if channels
            .positions
            .iter()
            .any(|&x| !v.grid().contains_interior(x))
        {
            return Err(Error::Config("channel site outside the open interval".into()));
        }
        Ok(Self { t: 0.0, v, channels })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub time: f64,
    pub channel: usize,
    pub from: usize,
    pub to: usize,
}

/// One random stream per channel.
#[derive(Clone, Debug)]
pub struct ChannelStreams {
    streams: Vec<ChaCha8Rng>,
}

impl ChannelStreams {
    pub fn new(seed: u64, channels: usize) -> Self {
        Self {
            streams: (0..channels as u64).map(|i| rng::stream(seed, i)).collect(),
        }
    }
}

/// Reusable machinery for stepping one channel configuration on one grid.
#[derive(Clone, Debug)]
pub struct StochStepper<'a> {
    kinetics: &'a ChannelKinetics,
    grid: Grid,
    cn: CrankNicolson,
}

impl<'a> StochStepper<'a> {
    pub fn new(grid: &Grid, kinetics: &'a ChannelKinetics) -> Self {
        Self {
            kinetics,
            grid: *grid,
            cn: CrankNicolson::new(grid),
        }
    }

    fn add_channel(&self, coupling: &mut SymTridiag, load: &mut Functional, x: f64, state: usize, w: f64) {
        let c = self.kinetics.conductance(state);
        if c != 0.0 {
            fem::add_point_coupling(&self.grid, coupling, x, w * c);
            load.add_point_mass_unchecked(x, w * c * self.kinetics.driving_potential(state));
        }
    }

    /// Advances `state` by `dt`, writing the frozen site voltages into
    /// `volts` and appending the substep's jumps (time-ordered) to `jumps`.
    pub fn step(
        &self,
        state: &mut StochasticState,
        dt: f64,
        streams: &mut ChannelStreams,
        volts: &mut Vec<f64>,
        jumps: &mut Vec<JumpRecord>,
    ) -> Result<()> {
        check_stability(dt, self.kinetics, STOCH_STABILITY_LIMIT)?;
        let channels = &mut state.channels;
        if streams.streams.len() != channels.len() {
            return Err(Error::Config("stream count differs from channel count".into()));
        }
        let t0 = state.t;
        let k = self.kinetics.len();

        volts.clear();
        volts.extend(channels.positions.iter().map(|&x| state.v.eval_unchecked(x)));

        let first = jumps.len();
        let mut rates = vec![0.0; k];
        for (i, r) in streams.streams.iter_mut().enumerate() {
            let v = volts[i];
            let mut s = channels.states[i];
            let mut clock = 0.0;
            loop {
                for (to, rate) in rates.iter_mut().enumerate() {
                    *rate = if to == s { 0.0 } else { self.kinetics.rate_unchecked(s, to, v) };
                }
                let exit: f64 = rates.iter().sum();
                clock += -(1.0 - r.random::<f64>()).ln() / exit;
                if clock >= dt {
                    break;
                }
                let to = pick(&rates, r.random::<f64>());
                jumps.push(JumpRecord {
                    time: clock,
                    channel: i,
                    from: s,
                    to,
                });
                s = to;
            }
        }
        // offsets are stored in `time` until the merge is done
        jumps[first..].sort_by(|a, b| a.time.total_cmp(&b.time).then(a.channel.cmp(&b.channel)));

        let w = 1.0 / channels.n as f64;
        let mut coupling = SymTridiag::zeros(self.grid.interior_len());
        let mut load = Functional::zero(&self.grid);
        for (&x, &s) in channels.positions.iter().zip(&channels.states) {
            self.add_channel(&mut coupling, &mut load, x, s, w);
        }

        let mut done = 0.0;
        for j in jumps[first..].iter_mut() {
            let (cf, ct) = (self.kinetics.conductance(j.from), self.kinetics.conductance(j.to));
            let changes_source = cf != ct
                || cf * self.kinetics.driving_potential(j.from) != ct * self.kinetics.driving_potential(j.to);
            if changes_source {
                if j.time > done {
                    let next = self.cn.step(state.v.values(), j.time - done, &coupling, load.loads());
                    state.v.values_mut().copy_from_slice(&next);
                    done = j.time;
                }
                let x = channels.positions[j.channel];
                self.add_channel(&mut coupling, &mut load, x, j.from, -w);
                self.add_channel(&mut coupling, &mut load, x, j.to, w);
            }
            debug_assert_eq!(channels.states[j.channel], j.from);
            channels.states[j.channel] = j.to;
            j.time += t0;
        }
        if dt > done {
            let next = self.cn.step(state.v.values(), dt - done, &coupling, load.loads());
            state.v.values_mut().copy_from_slice(&next);
        }
        state.t = t0 + dt;
        if let Some(bad) = state.v.values().iter().find(|x| !x.is_finite()) {
            return Err(Error::Invariant {
                t: state.t,
                what: format!("non-finite voltage {bad}"),
            });
        }
        Ok(())
    }
}

/// One frozen-rate substep; returns the new state and the substep's jumps.
pub fn step_stoch(
    state: &StochasticState,
    dt: f64,
    kinetics: &ChannelKinetics,
    streams: &mut ChannelStreams,
) -> Result<(StochasticState, Vec<JumpRecord>)> {
    let mut next = state.clone();
    let mut jumps = Vec::new();
    StochStepper::new(state.v.grid(), kinetics).step(&mut next, dt, streams, &mut Vec::new(), &mut jumps)?;
    Ok((next, jumps))
}

#[derive(Clone, Debug, PartialEq)]
pub struct StochSample {
    /// Index into [`StochTrajectory::times`].
    pub step: usize,
    pub t: f64,
    pub v: GridFunction,
    /// `∫_0^t ‖DV_s‖²_{L²} ds` (trapezoid over the substeps).
    pub dissipation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StochTrajectory {
    pub seed: u64,
    pub n: u32,
    pub dt: f64,
    pub horizon: f64,
    pub grid: Grid,
    pub positions: Vec<f64>,
    pub initial_states: Vec<usize>,
    pub final_states: Vec<usize>,
    /// Substep boundaries `t_0 = 0 < … < t_K = T`.
    pub times: Vec<f64>,
    /// Frozen site voltages, `K` rows of `positions.len()` values.
    pub rate_history: Vec<f64>,
    /// Jumps of substep `k` are `jumps[jump_offsets[k]..jump_offsets[k + 1]]`.
    pub jump_offsets: Vec<usize>,
    pub jumps: Vec<JumpRecord>,
    pub samples: Vec<StochSample>,
    pub sup_norm: f64,
    pub initial_l2: f64,
}

impl StochTrajectory {
    pub fn channel_count(&self) -> usize {
        self.positions.len()
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn has_rate_history(&self) -> bool {
        self.rate_history.len() == self.steps() * self.channel_count() && self.jump_offsets.len() == self.times.len()
    }

    pub fn volts(&self, step: usize) -> &[f64] {
        let c = self.channel_count();
        &self.rate_history[step * c..(step + 1) * c]
    }

    pub fn substep_jumps(&self, step: usize) -> &[JumpRecord] {
        &self.jumps[self.jump_offsets[step]..self.jump_offsets[step + 1]]
    }

    pub fn sample_times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Channel states at every sample, rebuilt from the jump log.
    pub fn sample_states(&self) -> Vec<ChannelConfig> {
        let mut states = self.initial_states.clone();
        let mut out = Vec::with_capacity(self.samples.len());
        let mut applied = 0;
        for s in &self.samples {
            let upto = self.jump_offsets.get(s.step).copied().unwrap_or(self.jumps.len());
            for j in &self.jumps[applied..upto] {
                states[j.channel] = j.to;
            }
            applied = upto;
            out.push(ChannelConfig {
                n: self.n,
                positions: self.positions.clone(),
                states: states.clone(),
            });
        }
        out
    }
}

pub fn run_stoch(
    init: &StochasticState,
    horizon: f64,
    dt: f64,
    kinetics: &ChannelKinetics,
    seed: u64,
) -> Result<StochTrajectory> {
    run_stoch_strided(init, horizon, dt, kinetics, seed, 1)
}

/// Runs the stochastic model to `horizon`, keeping every `stride`-th substep
/// (and the last) as a sample. The rate history and jump log are complete
/// regardless of `stride`.
pub fn run_stoch_strided(
    init: &StochasticState,
    horizon: f64,
    dt: f64,
    kinetics: &ChannelKinetics,
    seed: u64,
    stride: usize,
) -> Result<StochTrajectory> {
    check_stability(dt, kinetics, STOCH_STABILITY_LIMIT)?;
    if init.channels.states.iter().any(|&s| s >= kinetics.len()) {
        return Err(Error::Config("channel state outside the state space".into()));
    }
    let stride = stride.max(1);
    let times = time_grid(horizon, dt)?;
    let grid = *init.v.grid();
    let count = init.channels.len();
    let stepper = StochStepper::new(&grid, kinetics);
    let mut streams = ChannelStreams::new(seed, count);

    let mut state = init.clone();
    state.t = 0.0;
    let steps = times.len() - 1;
    let mut rate_history = Vec::with_capacity(steps * count);
    let mut jump_offsets = Vec::with_capacity(times.len());
    let mut jumps = Vec::new();
    let mut volts = Vec::with_capacity(count);
    let mut dissipation = 0.0;
    let mut grad_sq = state.v.gradient_norm_squared();
    let mut sup_norm = state.v.sup_norm();
    let mut samples = vec![StochSample {
        step: 0,
        t: 0.0,
        v: state.v.clone(),
        dissipation: 0.0,
    }];

    for (k, w) in times.windows(2).enumerate() {
        jump_offsets.push(jumps.len());
        stepper.step(&mut state, w[1] - w[0], &mut streams, &mut volts, &mut jumps)?;
        state.t = w[1];
        rate_history.extend_from_slice(&volts);
        let g = state.v.gradient_norm_squared();
        dissipation += 0.5 * (w[1] - w[0]) * (grad_sq + g);
        grad_sq = g;
        sup_norm = sup_norm.max(state.v.sup_norm());
        if (k + 1) % stride == 0 || k + 1 == steps {
            samples.push(StochSample {
                step: k + 1,
                t: state.t,
                v: state.v.clone(),
                dissipation,
            });
        }
    }
    jump_offsets.push(jumps.len());

    let initial_l2 = init.v.l2_norm();
    let bound = dissipation_bound(initial_l2, sup_norm, grid.half_length(), horizon, kinetics);
    if let Some(s) = samples.iter().find(|s| s.dissipation > bound) {
        return Err(Error::Invariant {
            t: s.t,
            what: format!("dissipation {} exceeds explicit bound {bound}", s.dissipation),
        });
    }
    Ok(StochTrajectory {
        seed,
        n: init.channels.n,
        dt,
        horizon,
        grid,
        positions: init.channels.positions.clone(),
        initial_states: init.channels.states.clone(),
        final_states: state.channels.states,
        times,
        rate_history,
        jump_offsets,
        jumps,
        samples,
        sup_norm,
        initial_l2,
    })
}
