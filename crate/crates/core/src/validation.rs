//! Oracle suites run by `axon validate`: kernel, norms, martingale and
//! likelihood. Each returns a report of named checks.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::decomposition::{martingale_diagnostics, martingale_series, martingale_variance_bound, path_log_likelihood};
use crate::deterministic::{run_det, DeterministicState};
use crate::error::{Error, Result};
use crate::grid::{Functional, Grid, NodalField};
use crate::kinetics::{ChannelKinetics, ChannelState, KineticsSpec, RateSpec};
use crate::rng;
use crate::semigroup::{
    absorbed_kernel, apply_semigroup, kernel_section, source_response, survival_probability, KernelParams,
};
use crate::stochastic::{run_stoch, ChannelConfig, StochasticState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Largest admissible value of `value`.
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            passed: value <= limit,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// `√(tanh(ℓ)/2)`, the H⁻¹ norm of `δ_0` on `[-ℓ, ℓ]`.
pub fn delta_norm_exact(half_length: f64) -> f64 {
    (half_length.tanh() / 2.0).sqrt()
}

/// `1/√(1 + λ₁)` with `λ₁ = (π/2ℓ)²`, the H⁻¹ norm of `μ⌞φ₁`, `φ₁` normalized
/// to unit amplitude (`‖φ₁‖²_{L²} = ℓ`).
pub fn eigen_density_norm_exact(half_length: f64) -> f64 {
    let lambda = (PI / (2.0 * half_length)).powi(2);
    (half_length / (1.0 + lambda)).sqrt()
}

pub fn norms_suite() -> Result<SuiteReport> {
    let grid = Grid::new(1.0, 2000)?;
    let delta = Functional::delta(&grid, 0.0)?.hminus1_norm();
    let phi = grid.eigenfunction(1);
    let density = Functional::density(&phi.to_nodal()).hminus1_norm();

    let mut r = rng::stream(0, 0);
    let mut duality: f64 = 0.0;
    let mut sharpness: f64 = 0.0;
    for _ in 0..20 {
        let mut f = Functional::zero(&grid);
        for _ in 0..5 {
            f.add_point_mass(r.random_range(-0.99..0.99), r.random_range(-1.0..1.0))?;
        }
        let scale = r.random_range(0.5..1.5);
        let u = grid.interpolate(|x| scale * (3.0 * x).sin() * (1.0 - x * x));
        duality = duality.max(u.pairing(&f)?.abs() - u.h10_norm() * f.hminus1_norm());
        let rep = f.riesz_representer();
        let norm = f.hminus1_norm();
        sharpness = sharpness.max((rep.pairing(&f)? - rep.h10_norm() * norm).abs() / (norm * norm));
    }
    Ok(SuiteReport {
        suite: "norms".into(),
        checks: vec![
            Check::at_most("hminus1(delta_0) error", (delta - delta_norm_exact(1.0)).abs(), 1e-3),
            Check::at_most(
                "hminus1(density of phi_1) error",
                (density - eigen_density_norm_exact(1.0)).abs(),
                1e-3,
            ),
            Check::at_most("duality excess", duality, 1e-12),
            Check::at_most("riesz sharpness defect", sharpness, 1e-10),
        ],
    })
}

/// `Ĉ₁`: largest `‖∫_0^t P_{t-s} δ_y ds‖_{H¹₀}` over the sites `ys`.
pub fn calibrate_source_constant(grid: &Grid, t: f64, samples: usize, ys: &[f64]) -> Result<f64> {
    let params = KernelParams::for_grid(grid);
    let ones = vec![1.0; samples + 1];
    ys.iter()
        .map(|&y| Ok(source_response(&ones, y, t, grid, &params)?.h10_norm()))
        .try_fold(0.0_f64, |acc, v: Result<f64>| Ok(acc.max(v?)))
}

/// `Ĉ₂(ε)`: largest `‖P_ε δ_y‖_{H¹₀}` over the sites `ys`. The H¹₀ norm of
/// `P_τ δ_y` decreases in `τ`, so this bounds the truncated response per unit
/// `∫|f|`.
pub fn calibrate_truncated_constant(grid: &Grid, eps: f64, ys: &[f64]) -> Result<f64> {
    let params = KernelParams::for_grid(grid);
    ys.iter()
        .map(|&y| Ok(kernel_section(eps, y, grid, &params)?.h10_norm()))
        .try_fold(0.0_f64, |acc, v: Result<f64>| Ok(acc.max(v?)))
}

pub fn kernel_suite() -> Result<SuiteReport> {
    let mut checks = Vec::new();
    let params = KernelParams::new(1.0);
    let mut r = rng::stream(1, 0);

    let mut asym: f64 = 0.0;
    for _ in 0..200 {
        let t = r.random_range(0.005..2.0);
        let x = r.random_range(-1.0..1.0);
        let y = r.random_range(-1.0..1.0);
        let a = absorbed_kernel(t, x, y, &params)?;
        let b = absorbed_kernel(t, y, x, &params)?;
        asym = asym.max((a - b).abs() / a.max(1e-300).max(1.0));
    }
    checks.push(Check::at_most("kernel asymmetry", asym, 1e-13));

    let grid = Grid::new(1.0, 400)?;
    let phi = grid.eigenfunction(1);
    let decayed = apply_semigroup(0.1, &phi, &params)?;
    let factor = (-(PI / 2.0).powi(2) * 0.1).exp();
    let err = (&decayed - &phi.scaled(factor)).sup_norm();
    checks.push(Check::at_most("eigen-decay at t = 0.1", err, 1e-4));

    let fine = Grid::new(1.0, 800)?;
    let f = fine.interpolate(|x| (1.0 - x * x) * (1.0 + 0.5 * x));
    let two_step = apply_semigroup(0.05, &apply_semigroup(0.1, &f, &params)?, &params)?;
    let one_step = apply_semigroup(0.15, &f, &params)?;
    checks.push(Check::at_most(
        "Chapman-Kolmogorov defect",
        (&two_step - &one_step).sup_norm(),
        1e-5,
    ));

    let mut mass_excess: f64 = f64::NEG_INFINITY;
    let mut monotone_excess: f64 = f64::NEG_INFINITY;
    for &x in &[-0.9, -0.3, 0.0, 0.5, 0.95] {
        let mut prev = f64::INFINITY;
        for &t in &[0.01, 0.05, 0.2, 0.5, 1.0] {
            let s = survival_probability(t, x, &fine, &params)?;
            mass_excess = mass_excess.max(s - 1.0);
            monotone_excess = monotone_excess.max(s - prev);
            prev = s;
        }
    }
    checks.push(Check::at_most("survival above one", mass_excess, 0.0));
    checks.push(Check::at_most("survival increase in t", monotone_excess, -1e-12));

    // Crank-Nicolson on zero kinetics against the kernel
    let zero = zero_conductance(&crate::kinetics::default_two_state());
    let k = ChannelKinetics::from_spec(&zero)?;
    let g = Grid::new(1.0, 400)?;
    let v0 = g.interpolate(|x| (1.0 - x * x) * (1.0 + 0.5 * x));
    let p = vec![NodalField::constant(&g, 0.5), NodalField::constant(&g, 0.5)];
    let det = run_det(&DeterministicState::new(v0.clone(), p)?, 0.1, 1e-3, &k)?;
    let exact = apply_semigroup(0.1, &v0, &params)?;
    checks.push(Check::at_most(
        "Crank-Nicolson vs kernel",
        (&det.last().v - &exact).sup_norm(),
        1e-4,
    ));

    let coarse = Grid::new(1.0, 100)?;
    let ys = [-0.6, -0.2, 0.0, 0.3, 0.7];
    let c1 = calibrate_source_constant(&coarse, 0.1, 40, &ys)?;
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let f: Vec<f64> = (0..=40).map(|_| r.random_range(-1.0..1.0)).collect();
        let sup = f.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        let y = ys[r.random_range(0..ys.len())];
        let resp = source_response(&f, y, 0.1, &coarse, &params)?;
        worst = worst.max(resp.h10_norm() / (c1 * sup));
    }
    checks.push(Check::at_most("source response / calibrated bound", worst, 1.0));

    for eps in [0.05, 0.1] {
        let c2 = calibrate_truncated_constant(&coarse, eps, &ys)?;
        let t = 0.3;
        let n = 40;
        let f: Vec<f64> = (0..=n).map(|_| r.random_range(-1.0..1.0)).collect();
        let ds = (t - eps) / n as f64;
        let l1: f64 = f
            .iter()
            .enumerate()
            .map(|(k, v)| if k == 0 || k == n { 0.5 * ds * v.abs() } else { ds * v.abs() })
            .sum();
        let resp = crate::semigroup::truncated_source_response(&f, 0.1, t, eps, &coarse, &params)?;
        checks.push(Check::at_most(
            &format!("truncated response / calibrated bound, eps = {eps}"),
            resp.h10_norm() / (c2 * l1),
            1.0,
        ));
    }

    Ok(SuiteReport {
        suite: "kernel".into(),
        checks,
    })
}

/// Copy of `spec` with every conductance set to zero.
pub fn zero_conductance(spec: &KineticsSpec) -> KineticsSpec {
    let mut out = spec.clone();
    for s in &mut out.states {
        s.conductance = 0.0;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleParams {
    pub n: u32,
    pub horizon: f64,
    pub replicates: u32,
    pub seed: u64,
}

impl Default for MartingaleParams {
    fn default() -> Self {
        Self {
            n: 100,
            horizon: 1.0,
            replicates: 2000,
            seed: 7,
        }
    }
}

/// Replicate statistics of `⟨φ₁, M_{ξ,t}⟩` at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleMoments {
    pub state: String,
    pub t: f64,
    pub mean: f64,
    pub standard_error: f64,
    pub variance: f64,
    pub predicted_variance: f64,
    pub second_moment: f64,
    pub second_moment_se: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub params: MartingaleParams,
    pub moments: Vec<MartingaleMoments>,
    /// Sample times and replicate-mean `‖M_{ξ,t}‖_{H⁻¹}`, indexed `[ξ][sample]`.
    pub times: Vec<f64>,
    pub mean_hminus1: Vec<Vec<f64>>,
    pub report: SuiteReport,
}

fn mean_and_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Martingale tests on `cfg` (grid, kinetics, initial data) with the scale,
/// horizon and replicate count of `params`.
pub fn martingale_suite(cfg: &RunConfig, params: &MartingaleParams) -> Result<MartingaleReport> {
    if params.replicates < 2 {
        return Err(Error::InsufficientData("need at least 2 replicates".into()));
    }
    let kinetics = cfg.kinetics()?;
    let grid = cfg.grid()?;
    let phi = grid.eigenfunction(1);
    let k = kinetics.len();
    let stride = ((params.horizon / cfg.dt / 40.0).round() as usize).max(1);

    struct Rep {
        pairing: Vec<Vec<f64>>,
        predicted: Vec<Vec<f64>>,
        times: Vec<f64>,
        hm1: Vec<Vec<f64>>,
    }
    let reps: Vec<Rep> = (0..params.replicates)
        .into_par_iter()
        .map(|rep| -> Result<Rep> {
            let seed = rng::derive_seed(params.seed, params.n, rep);
            let init = cfg.initial_stoch_state(params.n, seed)?;
            let traj = crate::stochastic::run_stoch_strided(&init, params.horizon, cfg.dt, &kinetics, seed, stride)?;
            let d = martingale_diagnostics(&traj, &phi, &kinetics)?;
            let hm1 = (0..k)
                .map(|xi| Ok(martingale_series(&traj, xi, &kinetics)?.hminus1_norms()))
                .collect::<Result<Vec<_>>>()?;
            Ok(Rep {
                pairing: d.pairing,
                predicted: d.predicted_variance,
                times: d.times,
                hm1,
            })
        })
        .collect::<Result<_>>()?;

    let times = reps[0].times.clone();
    let r = reps.len() as f64;
    let at = |target: f64| {
        times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
            .map(|(i, _)| i)
            .expect("samples present")
    };
    let bound = martingale_variance_bound(phi.sup_norm(), params.horizon, params.n, grid.half_length(), &kinetics);
    let mut moments = Vec::new();
    let mut checks = Vec::new();
    for xi in 0..k {
        let name = &cfg.kinetics.states[xi].name;
        for frac in [0.25, 0.5, 1.0] {
            let idx = at(frac * params.horizon);
            let t = times[idx];
            let x: Vec<f64> = reps.iter().map(|rep| rep.pairing[xi][idx]).collect();
            let (mean, variance) = mean_and_var(&x);
            let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
            let (second_moment, sq_var) = mean_and_var(&sq);
            let predicted_variance = reps.iter().map(|rep| rep.predicted[xi][idx]).sum::<f64>() / r;
            let m = MartingaleMoments {
                state: name.clone(),
                t,
                mean,
                standard_error: (variance / r).sqrt(),
                variance,
                predicted_variance,
                second_moment,
                second_moment_se: (sq_var / r).sqrt(),
                bound: martingale_variance_bound(phi.sup_norm(), t, params.n, grid.half_length(), &kinetics),
            };
            checks.push(Check::at_most(
                &format!("|mean| / 3 SE, {name}, t = {t}"),
                m.mean.abs() / (3.0 * m.standard_error),
                1.0,
            ));
            if frac == 1.0 {
                checks.push(Check::at_most(
                    &format!("variance vs prediction relative error, {name}"),
                    (m.variance - m.predicted_variance).abs() / m.predicted_variance,
                    0.15,
                ));
                checks.push(Check::at_most(
                    &format!("second moment minus bound over 3 SE, {name}"),
                    (m.second_moment - bound) / (3.0 * m.second_moment_se),
                    1.0,
                ));
            }
            moments.push(m);
        }
    }
    let mean_hminus1 = (0..k)
        .map(|xi| {
            (0..times.len())
                .map(|s| reps.iter().map(|rep| rep.hm1[xi][s]).sum::<f64>() / r)
                .collect()
        })
        .collect();
    Ok(MartingaleReport {
        params: params.clone(),
        moments,
        times,
        mean_hminus1,
        report: SuiteReport {
            suite: "martingale".into(),
            checks,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodReport {
    pub paths: u32,
    pub mean: f64,
    pub standard_error: f64,
    pub report: SuiteReport,
}

/// Two-state kinetics with every transition at the constant `rate` and no
/// conductance.
pub fn uniform_reference(states: &[ChannelState], rate: f64) -> Result<ChannelKinetics> {
    let mut rates = Vec::new();
    for a in states {
        for b in states {
            if a.name != b.name {
                rates.push(RateSpec {
                    from: a.name.clone(),
                    to: b.name.clone(),
                    form: "constant".into(),
                    params: vec![rate],
                });
            }
        }
    }
    ChannelKinetics::from_spec(&KineticsSpec {
        states: states
            .iter()
            .map(|s| ChannelState {
                conductance: 0.0,
                ..s.clone()
            })
            .collect(),
        rates,
        clamp: [0.5 * rate, 2.0 * rate],
    })
}

/// Change-of-measure identity `E_ref[h] = 1` for one channel at the origin
/// with `V ≡ 0`: paths are drawn from the unit-rate reference chain and
/// weighted by the likelihood of the model kinetics.
pub fn likelihood_suite(model: &KineticsSpec, paths: u32, horizon: f64, seed: u64) -> Result<LikelihoodReport> {
    let model = ChannelKinetics::from_spec(&zero_conductance(model))?;
    let reference_rate = 1.0;
    let per_transition = reference_rate / (model.len() - 1) as f64;
    let reference = uniform_reference(model.states(), per_transition)?;
    let grid = Grid::new(1.0, 8)?;
    let dt = 0.05;
    let weights: Vec<f64> = (0..paths)
        .into_par_iter()
        .map(|p| -> Result<f64> {
            let channels = ChannelConfig::new(1, 1.0, vec![(p as usize) % model.len()])?;
            let init = StochasticState::new(grid.zeros(), channels)?;
            let traj = run_stoch(&init, horizon, dt, &reference, rng::derive_seed(seed, 1, p))?;
            Ok(path_log_likelihood(&traj, &model, reference_rate)?.exp())
        })
        .collect::<Result<_>>()?;
    let (mean, var) = mean_and_var(&weights);
    let se = (var / paths as f64).sqrt();
    Ok(LikelihoodReport {
        paths,
        mean,
        standard_error: se,
        report: SuiteReport {
            suite: "likelihood".into(),
            checks: vec![Check::at_most("|mean - 1| / 3 SE", (mean - 1.0).abs() / (3.0 * se), 1.0)],
        },
    })
}
