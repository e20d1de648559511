//! Discrete H¹₀(I), H⁻¹(I) and the nodal fields that live on a uniform grid
//! of the axon interval `I = [-ℓ, ℓ]`.
//!
//! Functions are continuous piecewise-linear interpolants. A [`GridFunction`]
//! stores interior nodal values only (its boundary values are zero), a
//! [`NodalField`] stores every node, and a [`Functional`] stores its pairings
//! with the interior hat functions. All norms use exact per-cell formulas for
//! piecewise-linear data.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};
use crate::fem;
use crate::linalg::dot;

/// Uniform partition of `[-ℓ, ℓ]` into `M` cells.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    half_length: f64,
    cells: usize,
    spacing: f64,
}

impl Grid {
    pub fn new(half_length: f64, cells: usize) -> Result<Self> {
        if !(half_length > 0.0) || !half_length.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "half-length must be positive and finite, got {half_length}"
            )));
        }
        if cells < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 cells, got {cells}"
            )));
        }
        Ok(Self {
            half_length,
            cells,
            spacing: 2.0 * half_length / cells as f64,
        })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Number of interior nodes, `M - 1`.
    pub fn interior_len(&self) -> usize {
        self.cells - 1
    }

    /// Coordinate of node `j` for `j = 0..=M`.
    pub fn node(&self, j: usize) -> f64 {
        if j == self.cells {
            self.half_length
        } else {
            -self.half_length + j as f64 * self.spacing
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.cells).map(|j| self.node(j)).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= -self.half_length && x <= self.half_length
    }

    pub fn contains_interior(&self, x: f64) -> bool {
        x > -self.half_length && x < self.half_length
    }

    /// Cell index `m` and local coordinate `θ ∈ [0, 1]` with
    /// `x = x_m + θ h`. Callers must check `contains(x)` first.
    pub(crate) fn locate(&self, x: f64) -> (usize, f64) {
        let s = (x + self.half_length) / self.spacing;
        let m = (s.floor().max(0.0) as usize).min(self.cells - 1);
        let theta = (s - m as f64).clamp(0.0, 1.0);
        (m, theta)
    }

    pub fn zeros(&self) -> GridFunction {
        GridFunction {
            grid: *self,
            values: vec![0.0; self.interior_len()],
        }
    }

    /// Interpolant of `f` vanishing at `±ℓ` (the boundary values of `f` are
    /// ignored).
    pub fn interpolate(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            grid: *self,
            values: (1..self.cells).map(|j| f(self.node(j))).collect(),
        }
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> NodalField {
        NodalField {
            grid: *self,
            values: (0..=self.cells).map(|j| f(self.node(j))).collect(),
        }
    }

    /// `k`-th Dirichlet eigenfunction `sin(kπ(x+ℓ)/(2ℓ))`.
    pub fn eigenfunction(&self, k: usize) -> GridFunction {
        let l = self.half_length;
        self.interpolate(|x| (k as f64 * std::f64::consts::PI * (x + l) / (2.0 * l)).sin())
    }

    /// Eigenvalue of `-Δ` belonging to [`Grid::eigenfunction`].
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let w = k as f64 * std::f64::consts::PI / (2.0 * self.half_length);
        w * w
    }
}

fn check_same(a: &Grid, b: &Grid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Element of the discrete H¹₀(I).
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn from_interior(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.interior_len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} interior values, got {}",
                grid.interior_len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Interior nodal values `j = 1..M-1`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at node `j = 0..=M`, zero at both ends.
    pub fn node_value(&self, j: usize) -> f64 {
        if j == 0 || j == self.grid.cells {
            0.0
        } else {
            self.values[j - 1]
        }
    }

    pub fn to_nodal(&self) -> NodalField {
        NodalField {
            grid: self.grid,
            values: (0..=self.grid.cells).map(|j| self.node_value(j)).collect(),
        }
    }

    fn cell_values(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.grid.cells).map(move |m| (self.node_value(m), self.node_value(m + 1)))
    }

    pub fn l2_norm_squared(&self) -> f64 {
        let h = self.grid.spacing;
        self.cell_values()
            .map(|(a, b)| h / 3.0 * (a * a + a * b + b * b))
            .sum()
    }

    /// Exact `‖u‖_{L²(I)}` of the interpolant.
    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_squared().sqrt()
    }

    /// `‖Du‖²_{L²}` with `Du` the piecewise-constant derivative.
    pub fn gradient_norm_squared(&self) -> f64 {
        let h = self.grid.spacing;
        self.cell_values().map(|(a, b)| (b - a) * (b - a) / h).sum()
    }

    /// Full norm `(‖u‖²_{L²} + ‖Du‖²_{L²})^{1/2}`.
    pub fn h10_norm(&self) -> f64 {
        (self.l2_norm_squared() + self.gradient_norm_squared()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `max |Du|` over cells.
    pub fn gradient_sup(&self) -> f64 {
        let h = self.grid.spacing;
        self.cell_values()
            .fold(0.0_f64, |m, (a, b)| m.max((b - a).abs() / h))
    }

    /// Linear interpolation; zero at `±ℓ`.
    pub fn eval_at(&self, x: f64) -> Result<f64> {
        if !self.grid.contains(x) {
            return Err(Error::OutOfDomain {
                x,
                domain: format!("[-{0}, {0}]", self.grid.half_length),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        let (m, theta) = self.grid.locate(x);
        (1.0 - theta) * self.node_value(m) + theta * self.node_value(m + 1)
    }

    /// `⟨φ, F⟩ = Σ_j φ_j · loads_j`.
    pub fn pairing(&self, f: &Functional) -> Result<f64> {
        check_same(&self.grid, &f.grid)?;
        Ok(dot(&self.values, &f.loads))
    }

    pub fn scaled(&self, alpha: f64) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }
}

impl Add for &GridFunction {
    type Output = GridFunction;
    fn add(self, rhs: &GridFunction) -> GridFunction {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        GridFunction {
            grid: self.grid,
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &GridFunction {
    type Output = GridFunction;
    fn sub(self, rhs: &GridFunction) -> GridFunction {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        GridFunction {
            grid: self.grid,
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul<&GridFunction> for f64 {
    type Output = GridFunction;
    fn mul(self, rhs: &GridFunction) -> GridFunction {
        rhs.scaled(self)
    }
}

/// Element of the discrete H⁻¹(I): `loads_j = ⟨φ_j, F⟩` for interior hats.
#[derive(Clone, Debug, PartialEq)]
pub struct Functional {
    grid: Grid,
    loads: Vec<f64>,
}

impl Functional {
    pub fn zero(grid: &Grid) -> Self {
        Self {
            grid: *grid,
            loads: vec![0.0; grid.interior_len()],
        }
    }

    pub fn from_loads(grid: Grid, loads: Vec<f64>) -> Result<Self> {
        if loads.len() != grid.interior_len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} loads, got {}",
                grid.interior_len(),
                loads.len()
            )));
        }
        Ok(Self { grid, loads })
    }

    /// Dirac mass at `y ∈ I°`, loaded with the hat interpolation weights.
    pub fn delta(grid: &Grid, y: f64) -> Result<Self> {
        let mut f = Self::zero(grid);
        f.add_point_mass(y, 1.0)?;
        Ok(f)
    }

    /// `μ⌞f`, exact for the piecewise-linear interpolant of `f`.
    pub fn density(f: &NodalField) -> Self {
        Self {
            grid: f.grid,
            loads: fem::load_vector(&f.grid, f.values()),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn loads(&self) -> &[f64] {
        &self.loads
    }

    /// Adds `weight · δ_y`.
    pub fn add_point_mass(&mut self, y: f64, weight: f64) -> Result<()> {
        if !self.grid.contains_interior(y) {
            return Err(Error::OutOfDomain {
                x: y,
                domain: format!("(-{0}, {0})", self.grid.half_length),
            });
        }
        self.add_point_mass_unchecked(y, weight);
        Ok(())
    }

    pub(crate) fn add_point_mass_unchecked(&mut self, y: f64, weight: f64) {
        let (m, theta) = self.grid.locate(y);
        // interior node j sits at loads[j - 1]
        if m >= 1 {
            self.loads[m - 1] += weight * (1.0 - theta);
        }
        if m + 1 < self.grid.cells {
            self.loads[m] += weight * theta;
        }
    }

    /// Solves `(K + M) u = loads`, the discrete Riesz map of the H¹₀ norm.
    pub fn riesz_representer(&self) -> GridFunction {
        let a = fem::riesz_matrix(&self.grid);
        GridFunction {
            grid: self.grid,
            values: a.solve(&self.loads),
        }
    }

    /// Dual norm of [`GridFunction::h10_norm`].
    pub fn hminus1_norm(&self) -> f64 {
        if self.loads.iter().all(|&l| l == 0.0) {
            return 0.0;
        }
        let u = self.riesz_representer();
        dot(&self.loads, u.values()).max(0.0).sqrt()
    }

    pub fn scaled(&self, alpha: f64) -> Functional {
        Functional {
            grid: self.grid,
            loads: self.loads.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Functional, alpha: f64) {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        for (a, b) in self.loads.iter_mut().zip(&other.loads) {
            *a += alpha * b;
        }
    }
}

impl Add for &Functional {
    type Output = Functional;
    fn add(self, rhs: &Functional) -> Functional {
        let mut out = self.clone();
        out.add_scaled(rhs, 1.0);
        out
    }
}

impl Sub for &Functional {
    type Output = Functional;
    fn sub(self, rhs: &Functional) -> Functional {
        let mut out = self.clone();
        out.add_scaled(rhs, -1.0);
        out
    }
}

/// Nodal values at every node including `±ℓ`; no boundary condition.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalField {
    grid: Grid,
    values: Vec<f64>,
}

impl NodalField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells + 1 {
            return Err(Error::InvalidGrid(format!(
                "expected {} nodal values, got {}",
                grid.cells + 1,
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self {
            grid: *grid,
            values: vec![value; grid.cells + 1],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn eval_at(&self, x: f64) -> Result<f64> {
        if !self.grid.contains(x) {
            return Err(Error::OutOfDomain {
                x,
                domain: format!("[-{0}, {0}]", self.grid.half_length),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        let (m, theta) = self.grid.locate(x);
        (1.0 - theta) * self.values[m] + theta * self.values[m + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_grid_examples() {
        let g = Grid::new(1.0, 4).unwrap();
        assert_eq!(g.nodes(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(g.spacing(), 0.5);
        assert!(Grid::new(1.0, 1).is_err());
        assert!(Grid::new(0.0, 4).is_err());
        assert!(Grid::new(-1.0, 4).is_err());
        let g = Grid::new(2.5, 10).unwrap();
        assert_eq!(g.spacing(), 0.5);
        assert_eq!(g.interior_len(), 9);
        assert_eq!(g.node(0), -2.5);
        assert_eq!(g.node(10), 2.5);
    }

    #[test]
    fn zero_function_norms() {
        let g = Grid::new(1.0, 8).unwrap();
        let z = g.zeros();
        assert_eq!(z.l2_norm(), 0.0);
        assert_eq!(z.h10_norm(), 0.0);
        assert_eq!(Functional::zero(&g).hminus1_norm(), 0.0);
    }

    #[test]
    fn hat_closed_forms() {
        let g = Grid::new(1.0, 4).unwrap();
        let h = g.spacing();
        let mut hat = g.zeros();
        hat.values_mut()[1] = 1.0;
        assert!((hat.l2_norm() - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((hat.h10_norm() - (2.0 * h / 3.0 + 2.0 / h).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn delta_loads() {
        let g = Grid::new(1.0, 4).unwrap();
        let d = Functional::delta(&g, 0.0).unwrap();
        assert_eq!(d.loads(), &[0.0, 1.0, 0.0]);
        let d = Functional::delta(&g, 0.25).unwrap();
        assert_eq!(d.loads(), &[0.0, 0.5, 0.5]);
        assert!(Functional::delta(&g, 1.0).is_err());
        assert!(Functional::delta(&g, -1.5).is_err());
        // near the boundary only the interior neighbour is loaded
        let d = Functional::delta(&g, -0.75).unwrap();
        assert_eq!(d.loads(), &[0.5, 0.0, 0.0]);
    }

    #[test]
    fn eval_at_examples() {
        let g = Grid::new(1.0, 4).unwrap();
        let u = GridFunction::from_interior(g, vec![1.0, 3.0, -2.0]).unwrap();
        assert_eq!(u.eval_at(-1.0).unwrap(), 0.0);
        assert_eq!(u.eval_at(1.0).unwrap(), 0.0);
        assert_eq!(u.eval_at(0.0).unwrap(), 3.0);
        assert_eq!(u.eval_at(-0.25).unwrap(), 2.0);
        assert!(u.eval_at(1.01).is_err());
        let d = Functional::delta(&g, 0.3).unwrap();
        assert!((u.pairing(&d).unwrap() - u.eval_at(0.3).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn density_of_one_is_spacing() {
        let g = Grid::new(1.0, 10).unwrap();
        let f = Functional::density(&NodalField::constant(&g, 1.0));
        for &l in f.loads() {
            assert!((l - g.spacing()).abs() < 1e-15);
        }
        let z = Functional::density(&NodalField::constant(&g, 0.0));
        assert!(z.loads().iter().all(|&l| l == 0.0));
    }

    #[test]
    fn pairing_checks_grid_and_is_bilinear() {
        let g = Grid::new(1.0, 6).unwrap();
        let other = Grid::new(1.0, 8).unwrap();
        let phi = g.eigenfunction(1);
        let f = Functional::delta(&g, 0.1).unwrap();
        assert!(phi.pairing(&Functional::zero(&other)).is_err());
        assert_eq!(phi.pairing(&Functional::zero(&g)).unwrap(), 0.0);
        let two = 2.0 * &phi;
        assert!((two.pairing(&f).unwrap() - 2.0 * phi.pairing(&f).unwrap()).abs() < 1e-15);
    }
}
