//! Integrator for the deterministic model: the reaction–diffusion PDE
//! `∂_t v = Δv + Σ_ξ c_ξ p_ξ (v_ξ - v)` coupled to the proportion ODEs.
//!
//! Each step is a Strang splitting: a half step of the proportion ODEs with
//! `v` frozen (RK4 at every node), a full Crank–Nicolson step of the PDE
//! with `a = Σ c_ξ p_ξ` and `b = Σ c_ξ p_ξ v_ξ` frozen at the midpoint
//! proportions, and a second proportion half step.

use crate::error::{Error, Result};
use crate::fem::{self, CrankNicolson};
use crate::grid::{Grid, GridFunction, NodalField};
use crate::kinetics::ChannelKinetics;

/// Stability guard of the proportion substep: `Δt (|E|-1) α_max ≤ 0.5`.
pub const DET_STABILITY_LIMIT: f64 = 0.5;

pub const SUM_TOLERANCE: f64 = 1e-12;
pub const PROPORTION_TOLERANCE: f64 = 1e-9;
pub const VOLTAGE_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct DeterministicState {
    pub t: f64,
    pub v: GridFunction,
    /// One field per state, indexed like the kinetics' states.
    pub p: Vec<NodalField>,
}

impl DeterministicState {
    pub fn new(v: GridFunction, p: Vec<NodalField>) -> Result<Self> {
        if p.iter().any(|f| f.grid() != v.grid()) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { t: 0.0, v, p })
    }

    pub fn grid(&self) -> &Grid {
        self.v.grid()
    }

    /// `max_j |Σ_ξ p_ξ(x_j) - 1|`.
    pub fn sum_defect(&self) -> f64 {
        let nodes = self.grid().cells() + 1;
        (0..nodes)
            .map(|j| (self.p.iter().map(|f| f.values()[j]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    fn proportion_range(&self) -> (f64, f64) {
        self.p
            .iter()
            .flat_map(|f| f.values().iter().copied())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
    }

    pub fn validate(&self, kinetics: &ChannelKinetics) -> Result<()> {
        if self.p.len() != kinetics.len() {
            return Err(Error::Config(format!(
                "{} proportion fields for {} states",
                self.p.len(),
                kinetics.len()
            )));
        }
        let (lo, hi) = self.proportion_range();
        if lo < 0.0 || hi > 1.0 {
            return Err(Error::Invariant {
                t: self.t,
                what: format!("proportions leave [0, 1]: [{lo}, {hi}]"),
            });
        }
        let defect = self.sum_defect();
        if defect > SUM_TOLERANCE {
            return Err(Error::Invariant {
                t: self.t,
                what: format!("proportions sum to 1 ± {defect}"),
            });
        }
        Ok(())
    }
}

/// `a = Σ c_ξ p_ξ` and `b = Σ c_ξ p_ξ v_ξ`, so that the PDE reads
/// `∂_t v = Δv - a v + b`.
pub fn reaction_coefficients(p: &[NodalField], kinetics: &ChannelKinetics) -> (NodalField, NodalField) {
    let grid = *p[0].grid();
    let mut a = NodalField::constant(&grid, 0.0);
    let mut b = NodalField::constant(&grid, 0.0);
    for (xi, field) in p.iter().enumerate() {
        let c = kinetics.conductance(xi);
        let cv = c * kinetics.driving_potential(xi);
        for ((aj, bj), &pj) in a
            .values_mut()
            .iter_mut()
            .zip(b.values_mut().iter_mut())
            .zip(field.values())
        {
            *aj += c * pj;
            *bj += cv * pj;
        }
    }
    (a, b)
}

/// Right-hand side of the proportion ODEs at every node, given `v`.
pub fn proportion_drift(p: &[NodalField], v: &GridFunction, kinetics: &ChannelKinetics) -> Vec<NodalField> {
    let grid = *v.grid();
    let n = kinetics.len();
    let mut out: Vec<NodalField> = (0..n).map(|_| NodalField::constant(&grid, 0.0)).collect();
    let mut local = vec![0.0; n];
    let mut drift = vec![0.0; n];
    for j in 0..=grid.cells() {
        for (xi, f) in p.iter().enumerate() {
            local[xi] = f.values()[j];
        }
        kinetics.proportion_drift(&local, v.node_value(j), &mut drift);
        for (xi, f) in out.iter_mut().enumerate() {
            f.values_mut()[j] = drift[xi];
        }
    }
    out
}

fn check_guard(dt: f64, kinetics: &ChannelKinetics, limit: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::NonPositiveTime(dt));
    }
    let product = dt * (kinetics.len() - 1) as f64 * kinetics.alpha_max();
    if product > limit {
        return Err(Error::StabilityGuard { dt, product, limit });
    }
    Ok(())
}

pub(crate) fn check_stability(dt: f64, kinetics: &ChannelKinetics, limit: f64) -> Result<()> {
    check_guard(dt, kinetics, limit)
}

/// Reusable stepping machinery for one grid and one kinetics.
#[derive(Clone, Debug)]
pub struct DetStepper<'a> {
    kinetics: &'a ChannelKinetics,
    grid: Grid,
    cn: CrankNicolson,
}

impl<'a> DetStepper<'a> {
    pub fn new(grid: &Grid, kinetics: &'a ChannelKinetics) -> Self {
        Self {
            kinetics,
            grid: *grid,
            cn: CrankNicolson::new(grid),
        }
    }

    /// RK4 on `p' = Qᵀ(v_j) p` at every node over `dt`.
    fn advance_proportions(&self, state: &mut DeterministicState, dt: f64) -> Result<()> {
        let n = self.kinetics.len();
        let mut p = vec![0.0; n];
        let mut stage = vec![0.0; n];
        let mut k = vec![vec![0.0; n]; 4];
        for j in 0..=self.grid.cells() {
            let v = state.v.node_value(j);
            let q = self.kinetics.generator_matrix(v);
            let apply = |x: &[f64], out: &mut [f64]| {
                for (b, o) in out.iter_mut().enumerate() {
                    *o = (0..n).map(|a| q[a][b] * x[a]).sum();
                }
            };
            for (xi, f) in state.p.iter().enumerate() {
                p[xi] = f.values()[j];
            }
            apply(&p, &mut k[0]);
            for (s, (x, d)) in stage.iter_mut().zip(p.iter().zip(&k[0])) {
                *s = x + 0.5 * dt * d;
            }
            apply(&stage, &mut k[1]);
            for (s, (x, d)) in stage.iter_mut().zip(p.iter().zip(&k[1])) {
                *s = x + 0.5 * dt * d;
            }
            apply(&stage, &mut k[2]);
            for (s, (x, d)) in stage.iter_mut().zip(p.iter().zip(&k[2])) {
                *s = x + dt * d;
            }
            apply(&stage, &mut k[3]);
            for xi in 0..n {
                p[xi] += dt / 6.0 * (k[0][xi] + 2.0 * k[1][xi] + 2.0 * k[2][xi] + k[3][xi]);
            }
            if p.iter().any(|&x| x < 0.0) {
                if p.iter().any(|&x| x < -PROPORTION_TOLERANCE) {
                    return Err(Error::Invariant {
                        t: state.t,
                        what: format!("negative proportion {p:?} at node {j}"),
                    });
                }
                p.iter_mut().for_each(|x| *x = x.max(0.0));
                let total: f64 = p.iter().sum();
                p.iter_mut().for_each(|x| *x /= total);
            }
            for (xi, f) in state.p.iter_mut().enumerate() {
                f.values_mut()[j] = p[xi];
            }
        }
        Ok(())
    }

    fn advance_voltage(&self, state: &mut DeterministicState, dt: f64) {
        let (a, b) = reaction_coefficients(&state.p, self.kinetics);
        let reaction = fem::weighted_mass_matrix(&self.grid, a.values());
        let load = fem::load_vector(&self.grid, b.values());
        let next = self.cn.step(state.v.values(), dt, &reaction, &load);
        state.v.values_mut().copy_from_slice(&next);
    }

    /// One Strang step of length `dt`.
    pub fn step(&self, state: &DeterministicState, dt: f64) -> Result<DeterministicState> {
        check_guard(dt, self.kinetics, DET_STABILITY_LIMIT)?;
        let mut next = state.clone();
        self.advance_proportions(&mut next, 0.5 * dt)?;
        self.advance_voltage(&mut next, dt);
        self.advance_proportions(&mut next, 0.5 * dt)?;
        next.t = state.t + dt;
        Ok(next)
    }
}

/// Single Strang step; see [`DetStepper`] for repeated use.
pub fn step_det(state: &DeterministicState, dt: f64, kinetics: &ChannelKinetics) -> Result<DeterministicState> {
    DetStepper::new(state.grid(), kinetics).step(state, dt)
}

/// Explicit right-hand side of the dissipation estimate:
/// `S₀² + ℓ T (max c_ξ) S (S + max |v_ξ|)`.
pub fn dissipation_bound(initial_l2: f64, sup: f64, half_length: f64, horizon: f64, kinetics: &ChannelKinetics) -> f64 {
    initial_l2 * initial_l2
        + half_length * horizon * kinetics.max_conductance() * sup * (sup + kinetics.max_abs_potential())
}

/// Uniform time grid `t_k = min(k Δt, T)`.
pub(crate) fn time_grid(horizon: f64, dt: f64) -> Result<Vec<f64>> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::Config(format!("horizon must be nonnegative, got {horizon}")));
    }
    if !(dt > 0.0) {
        return Err(Error::NonPositiveTime(dt));
    }
    let steps = (horizon / dt - 1e-9).ceil().max(0.0) as usize;
    let mut times: Vec<f64> = (0..=steps).map(|k| (k as f64 * dt).min(horizon)).collect();
    if let Some(last) = times.last_mut() {
        *last = horizon;
    }
    Ok(times)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetSample {
    pub t: f64,
    pub v: GridFunction,
    pub p: Vec<NodalField>,
    /// `∫_0^t ‖Dv_s‖²_{L²} ds` (trapezoid over the steps).
    pub dissipation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetTrajectory {
    pub dt: f64,
    pub horizon: f64,
    pub samples: Vec<DetSample>,
    /// Observed `sup_t ‖v_t‖_∞`.
    pub sup_norm: f64,
    /// `sup_t max_x |Dv_t|`.
    pub gradient_sup: f64,
    pub initial_l2: f64,
}

impl DetTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &DetSample {
        self.samples.last().expect("trajectory holds the initial state")
    }

    pub fn max_sum_defect(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| {
                let nodes = s.v.grid().cells() + 1;
                (0..nodes)
                    .map(|j| (s.p.iter().map(|f| f.values()[j]).sum::<f64>() - 1.0).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// Runs the deterministic model to `horizon`, recording every `stride`-th
/// step (and always the last one).
pub fn run_det(
    init: &DeterministicState,
    horizon: f64,
    dt: f64,
    kinetics: &ChannelKinetics,
) -> Result<DetTrajectory> {
    run_det_strided(init, horizon, dt, kinetics, 1)
}

pub fn run_det_strided(
    init: &DeterministicState,
    horizon: f64,
    dt: f64,
    kinetics: &ChannelKinetics,
    stride: usize,
) -> Result<DetTrajectory> {
    init.validate(kinetics)?;
    check_guard(dt, kinetics, DET_STABILITY_LIMIT)?;
    let stride = stride.max(1);
    let times = time_grid(horizon, dt)?;
    let stepper = DetStepper::new(init.grid(), kinetics);

    let v0 = init.v.values();
    let lower = kinetics.v_minus().min(v0.iter().copied().fold(0.0, f64::min)) - VOLTAGE_TOLERANCE;
    let upper = kinetics.v_plus().max(v0.iter().copied().fold(0.0, f64::max)) + VOLTAGE_TOLERANCE;

    let mut state = init.clone();
    state.t = 0.0;
    let mut dissipation = 0.0;
    let mut grad_sq = state.v.gradient_norm_squared();
    let mut sup_norm = state.v.sup_norm();
    let mut gradient_sup = state.v.gradient_sup();
    let mut samples = vec![DetSample {
        t: 0.0,
        v: state.v.clone(),
        p: state.p.clone(),
        dissipation: 0.0,
    }];

    for (k, w) in times.windows(2).enumerate() {
        let mut next = stepper.step(&state, w[1] - w[0])?;
        next.t = w[1];
        let g = next.v.gradient_norm_squared();
        dissipation += 0.5 * (w[1] - w[0]) * (grad_sq + g);
        grad_sq = g;
        sup_norm = sup_norm.max(next.v.sup_norm());
        gradient_sup = gradient_sup.max(next.v.gradient_sup());

        let defect = next.sum_defect();
        if defect > SUM_TOLERANCE {
            return Err(Error::Invariant {
                t: next.t,
                what: format!("proportions sum to 1 ± {defect:e}"),
            });
        }
        let (plo, phi) = next.proportion_range();
        if plo < -PROPORTION_TOLERANCE || phi > 1.0 + PROPORTION_TOLERANCE {
            return Err(Error::Invariant {
                t: next.t,
                what: format!("proportions leave [0, 1]: [{plo}, {phi}]"),
            });
        }
        if let Some(&bad) = next.v.values().iter().find(|&&x| x < lower || x > upper) {
            return Err(Error::Invariant {
                t: next.t,
                what: format!("voltage {bad} outside [{lower}, {upper}]"),
            });
        }
        state = next;
        if (k + 1) % stride == 0 || k + 2 == times.len() {
            samples.push(DetSample {
                t: state.t,
                v: state.v.clone(),
                p: state.p.clone(),
                dissipation,
            });
        }
    }

    let initial_l2 = init.v.l2_norm();
    let bound = dissipation_bound(initial_l2, sup_norm, init.grid().half_length(), horizon, kinetics);
    if let Some(s) = samples.iter().find(|s| s.dissipation > bound) {
        return Err(Error::Invariant {
            t: s.t,
            what: format!("dissipation {} exceeds explicit bound {bound}", s.dissipation),
        });
    }
    Ok(DetTrajectory {
        dt,
        horizon,
        samples,
        sup_norm,
        gradient_sup,
        initial_l2,
    })
}
