//! Dirichlet heat kernel on `[-ℓ, ℓ]` for `∂_t u = Δu`, summed by the method
//! of images, and the operators built from it.
//!
//! The kernel is
//!
//! ```text
//! p_t(x, y) = Σ_n g_t(y - (x + 4nℓ)) - Σ_n g_t(y - (-x - 2ℓ - 4nℓ)),
//! g_t(z) = exp(-z² / 4t) / √(4πt).
//! ```
//!
//! Images are summed in groups of increasing distance from the interval and
//! the series stops once a whole group contributes less than
//! [`KernelParams::truncation_tol`].

use std::f64::consts::PI;

use libm::{erf, erfc};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams {
    pub half_length: f64,
    pub truncation_tol: f64,
    pub image_cap: usize,
}

impl KernelParams {
    pub fn new(half_length: f64) -> Self {
        Self {
            half_length,
            truncation_tol: 1e-14,
            image_cap: 64,
        }
    }

    pub fn for_grid(grid: &Grid) -> Self {
        Self::new(grid.half_length())
    }

    fn validate(&self) -> Result<()> {
        if !(self.half_length > 0.0) || !(self.truncation_tol > 0.0) || self.image_cap == 0 {
            return Err(Error::Config(format!("invalid kernel parameters {self:?}")));
        }
        Ok(())
    }
}

fn gaussian(t: f64, z: f64) -> f64 {
    (-z * z / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

/// Image centres of group `k` with their signs. Group 0 holds the direct
/// term and the reflection through `-ℓ`; group `k ≥ 1` holds the two
/// translates `x ± 4kℓ` and the reflections with `n = k` and `n = -k - 1`.
fn image_group(x: f64, l: f64, k: usize) -> Vec<(f64, f64)> {
    let k = k as f64;
    let reflect = |n: f64| -x - 2.0 * l - 4.0 * n * l;
    if k == 0.0 {
        vec![(x, 1.0), (reflect(0.0), -1.0), (reflect(-1.0), -1.0)]
    } else {
        vec![
            (x + 4.0 * k * l, 1.0),
            (x - 4.0 * k * l, 1.0),
            (reflect(k), -1.0),
            (reflect(-k - 1.0), -1.0),
        ]
    }
}

/// Sums `term(centre)` over all images with the given signs, group by group,
/// until the group contribution `magnitude` falls below the tolerance.
fn sum_images(
    x: f64,
    params: &KernelParams,
    mut term: impl FnMut(f64) -> (f64, f64),
) -> Result<f64> {
    let mut total = 0.0;
    let mut residual = f64::INFINITY;
    for k in 0..=params.image_cap {
        let mut group_mag = 0.0;
        for (centre, sign) in image_group(x, params.half_length, k) {
            let (value, magnitude) = term(centre);
            total += sign * value;
            group_mag += magnitude;
        }
        residual = group_mag;
        if k >= 1 && group_mag < params.truncation_tol {
            return Ok(total);
        }
    }
    Err(Error::ImageSeries {
        cap: params.image_cap,
        residual,
    })
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveTime(t))
    }
}

fn check_position(x: f64, l: f64) -> Result<()> {
    if (-l..=l).contains(&x) {
        Ok(())
    } else {
        Err(Error::OutOfDomain {
            x,
            domain: format!("[-{l}, {l}]"),
        })
    }
}

/// Transition density `p_t^I(x, y)` of Brownian motion (generator Δ) killed
/// at `±ℓ`.
pub fn absorbed_kernel(t: f64, x: f64, y: f64, params: &KernelParams) -> Result<f64> {
    params.validate()?;
    check_time(t)?;
    check_position(x, params.half_length)?;
    check_position(y, params.half_length)?;
    let value = sum_images(x, params, |c| {
        let g = gaussian(t, y - c);
        (g, g)
    })?;
    Ok(value.max(0.0))
}

/// `∫_a^b (f0 + s (y - a)) g_t(y - c) dy` in closed form, together with the
/// integral of `|f|`-envelope used for truncation.
fn linear_gaussian_integral(t: f64, c: f64, a: f64, b: f64, f0: f64, f1: f64) -> (f64, f64) {
    let scale = (4.0 * t).sqrt();
    let za = (a - c) / scale;
    let zb = (b - c) / scale;
    let mass = if za >= 0.0 {
        0.5 * (erfc(za) - erfc(zb))
    } else if zb <= 0.0 {
        0.5 * (erfc(-zb) - erfc(-za))
    } else {
        0.5 * (erf(zb) - erf(za))
    };
    let slope = (f1 - f0) / (b - a);
    let first_moment = 2.0 * t * (gaussian(t, a - c) - gaussian(t, b - c));
    let value = (f0 + slope * (c - a)) * mass + slope * first_moment;
    (value, mass * f0.abs().max(f1.abs()))
}

/// `∫_I p_t(x, y) f(y) dy` with `f` the interpolant of the nodal values.
fn integrate_kernel(t: f64, x: f64, grid: &Grid, nodal: &[f64], params: &KernelParams) -> Result<f64> {
    let l = grid.half_length();
    let h = grid.spacing();
    let window = 9.0 * (4.0 * t).sqrt();
    sum_images(x, params, |c| {
        let lo = c - window;
        let hi = c + window;
        if hi < -l || lo > l {
            return (0.0, 0.0);
        }
        let first = (((lo + l) / h).floor().max(0.0)) as usize;
        let last = ((((hi + l) / h).ceil()) as usize).min(grid.cells());
        let mut value = 0.0;
        let mut magnitude = 0.0;
        for m in first..last {
            let (v, mag) = linear_gaussian_integral(
                t,
                c,
                grid.node(m),
                grid.node(m + 1),
                nodal[m],
                nodal[m + 1],
            );
            value += v;
            magnitude += mag;
        }
        (value, magnitude)
    })
}

/// Survival probability `∫_I p_t(x, y) dy` of the killed motion started at `x`.
pub fn survival_probability(t: f64, x: f64, grid: &Grid, params: &KernelParams) -> Result<f64> {
    params.validate()?;
    check_time(t)?;
    check_position(x, params.half_length)?;
    let ones = vec![1.0; grid.cells() + 1];
    integrate_kernel(t, x, grid, &ones, params)
}

/// `P_t f` at the interior nodes, integrating the kernel exactly against the
/// piecewise-linear interpolant of `f`.
pub fn apply_semigroup(t: f64, f: &GridFunction, params: &KernelParams) -> Result<GridFunction> {
    params.validate()?;
    check_time(t)?;
    let grid = *f.grid();
    let nodal = f.to_nodal();
    let values = (1..grid.cells())
        .map(|j| integrate_kernel(t, grid.node(j), &grid, nodal.values(), params))
        .collect::<Result<Vec<_>>>()?;
    GridFunction::from_interior(grid, values)
}

/// `∫_0^τ g_s(d) ds = √(τ/π) e^{-d²/4τ} - (d/2) erfc(d / 2√τ)`.
fn gaussian_time_integral(tau: f64, d: f64) -> f64 {
    let d = d.abs();
    (tau / PI).sqrt() * (-d * d / (4.0 * tau)).exp() - 0.5 * d * erfc(d / (2.0 * tau.sqrt()))
}

/// `∫_0^τ p_s(x, y) ds`, image by image in closed form.
fn kernel_time_integral(tau: f64, x: f64, y: f64, params: &KernelParams) -> Result<f64> {
    sum_images(x, params, |c| {
        let v = gaussian_time_integral(tau, y - c);
        (v, v)
    })
}

/// Samples of a scalar source on the uniform time grid `s_k = k·t/n`,
/// `k = 0..=n`.
fn time_step(samples: &[f64], span: f64) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData(
            "source needs at least two time samples".into(),
        ));
    }
    Ok(span / (samples.len() - 1) as f64)
}

/// `x ↦ ∫_0^t f(s) P_{t-s} δ_y(x) ds` at the interior nodes of `grid`.
///
/// Composite trapezoid in time, except on the last sub-interval where the
/// kernel is singular at `s = t`: there the mean of the two end samples
/// multiplies the closed-form time integral of every image.
pub fn source_response(
    f: &[f64],
    y: f64,
    t: f64,
    grid: &Grid,
    params: &KernelParams,
) -> Result<GridFunction> {
    params.validate()?;
    check_time(t)?;
    if !grid.contains_interior(y) {
        return Err(Error::OutOfDomain {
            x: y,
            domain: format!("(-{0}, {0})", grid.half_length()),
        });
    }
    let ds = time_step(f, t)?;
    let n = f.len() - 1;
    let mut values = Vec::with_capacity(grid.interior_len());
    for j in 1..grid.cells() {
        let x = grid.node(j);
        let mut acc = 0.0;
        for k in 0..n - 1 {
            let left = f[k] * absorbed_kernel(t - k as f64 * ds, x, y, params)?;
            let right = f[k + 1] * absorbed_kernel(t - (k + 1) as f64 * ds, x, y, params)?;
            acc += 0.5 * ds * (left + right);
        }
        acc += 0.5 * (f[n - 1] + f[n]) * kernel_time_integral(ds, x, y, params)?;
        values.push(acc);
    }
    GridFunction::from_interior(*grid, values)
}

/// `x ↦ ∫_0^{t-ε} f(s) P_{t-s} δ_y(x) ds`, with `f` sampled uniformly on
/// `[0, t-ε]`. The kernel is smooth on this window, so plain trapezoid is used.
pub fn truncated_source_response(
    f: &[f64],
    y: f64,
    t: f64,
    eps: f64,
    grid: &Grid,
    params: &KernelParams,
) -> Result<GridFunction> {
    params.validate()?;
    check_time(t)?;
    check_time(eps)?;
    if eps >= t {
        return Err(Error::Config(format!("cut-off {eps} must be below t = {t}")));
    }
    if !grid.contains_interior(y) {
        return Err(Error::OutOfDomain {
            x: y,
            domain: format!("(-{0}, {0})", grid.half_length()),
        });
    }
    let ds = time_step(f, t - eps)?;
    let n = f.len() - 1;
    let mut values = Vec::with_capacity(grid.interior_len());
    for j in 1..grid.cells() {
        let x = grid.node(j);
        let mut acc = 0.0;
        for (k, fk) in f.iter().enumerate() {
            let w = if k == 0 || k == n { 0.5 * ds } else { ds };
            acc += w * fk * absorbed_kernel(t - k as f64 * ds, x, y, params)?;
        }
        values.push(acc);
    }
    GridFunction::from_interior(*grid, values)
}

/// `p_t(·, y)` sampled at the interior nodes, i.e. `P_t δ_y`.
pub fn kernel_section(t: f64, y: f64, grid: &Grid, params: &KernelParams) -> Result<GridFunction> {
    let values = (1..grid.cells())
        .map(|j| absorbed_kernel(t, grid.node(j), y, params))
        .collect::<Result<Vec<_>>>()?;
    GridFunction::from_interior(*grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_time_and_position() {
        let p = KernelParams::new(1.0);
        assert!(absorbed_kernel(0.0, 0.0, 0.0, &p).is_err());
        assert!(absorbed_kernel(-1.0, 0.0, 0.0, &p).is_err());
        assert!(absorbed_kernel(0.1, 1.5, 0.0, &p).is_err());
        let g = Grid::new(1.0, 10).unwrap();
        assert!(apply_semigroup(0.0, &g.zeros(), &p).is_err());
        assert!(source_response(&[1.0, 1.0], 1.0, 0.1, &g, &p).is_err());
    }

    #[test]
    fn vanishes_at_the_boundary() {
        let p = KernelParams::new(1.0);
        for &t in &[0.01, 0.1, 1.0] {
            for &y in &[-0.7, 0.0, 0.4] {
                assert!(absorbed_kernel(t, 1.0, y, &p).unwrap() <= p.truncation_tol);
                assert!(absorbed_kernel(t, -1.0, y, &p).unwrap() <= p.truncation_tol);
            }
        }
    }

    #[test]
    fn time_integral_closed_form_matches_quadrature() {
        let tau = 0.03;
        for &d in &[0.0, 0.05, 0.2] {
            let n = 200_000;
            let ds = tau / n as f64;
            // midpoint rule avoids s = 0
            let q: f64 = (0..n).map(|k| gaussian((k as f64 + 0.5) * ds, d) * ds).sum();
            let tol = if d == 0.0 { 2e-4 } else { 1e-8 };
            assert!((q - gaussian_time_integral(tau, d)).abs() < tol, "d={d}");
        }
    }

    #[test]
    fn zero_inputs_give_zero() {
        let g = Grid::new(1.0, 20).unwrap();
        let p = KernelParams::for_grid(&g);
        let r = apply_semigroup(0.1, &g.zeros(), &p).unwrap();
        assert!(r.values().iter().all(|&v| v == 0.0));
        let r = source_response(&[0.0; 11], 0.2, 0.1, &g, &p).unwrap();
        assert!(r.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn image_cap_is_reported() {
        let p = KernelParams {
            half_length: 1.0,
            truncation_tol: 1e-14,
            image_cap: 1,
        };
        match absorbed_kernel(50.0, 0.1, 0.2, &p) {
            Err(Error::ImageSeries { cap: 1, .. }) => {}
            other => panic!("expected image-series error, got {other:?}"),
        }
    }
}
