//! P1 assembly on the interior nodes and the Crank–Nicolson step shared by
//! both integrators.

use crate::grid::Grid;
use crate::linalg::SymTridiag;

/// Consistent mass matrix `∫ φ_i φ_j`.
pub fn mass_matrix(grid: &Grid) -> SymTridiag {
    let n = grid.interior_len();
    let h = grid.spacing();
    SymTridiag {
        diag: vec![2.0 * h / 3.0; n],
        off: vec![h / 6.0; n.saturating_sub(1)],
    }
}

/// Stiffness matrix `∫ φ_i' φ_j'`.
pub fn stiffness_matrix(grid: &Grid) -> SymTridiag {
    let n = grid.interior_len();
    let h = grid.spacing();
    SymTridiag {
        diag: vec![2.0 / h; n],
        off: vec![-1.0 / h; n.saturating_sub(1)],
    }
}

/// `K + M`, the Gram matrix of the full H¹₀ inner product.
pub fn riesz_matrix(grid: &Grid) -> SymTridiag {
    stiffness_matrix(grid).combine(1.0, &mass_matrix(grid), 1.0)
}

/// `∫ w φ_i φ_j` for a piecewise-linear weight given at all `M + 1` nodes.
pub fn weighted_mass_matrix(grid: &Grid, weight: &[f64]) -> SymTridiag {
    let m = grid.cells();
    assert_eq!(weight.len(), m + 1);
    let h = grid.spacing();
    let mut a = SymTridiag::zeros(grid.interior_len());
    for (k, d) in a.diag.iter_mut().enumerate() {
        let j = k + 1;
        *d = h * (weight[j - 1] + 6.0 * weight[j] + weight[j + 1]) / 12.0;
    }
    for (k, o) in a.off.iter_mut().enumerate() {
        let j = k + 1;
        *o = h * (weight[j] + weight[j + 1]) / 12.0;
    }
    a
}

/// `∫ f φ_j` for a piecewise-linear `f` given at all `M + 1` nodes.
pub fn load_vector(grid: &Grid, f: &[f64]) -> Vec<f64> {
    assert_eq!(f.len(), grid.cells() + 1);
    let h = grid.spacing();
    (1..grid.cells())
        .map(|j| h / 6.0 * (f[j - 1] + 4.0 * f[j] + f[j + 1]))
        .collect()
}

/// Adds `w · hat(y) ⊗ hat(y)` to `a` (rank-one point-source coupling).
pub(crate) fn add_point_coupling(grid: &Grid, a: &mut SymTridiag, y: f64, w: f64) {
    let (m, theta) = grid.locate(y);
    let left = m >= 1;
    let right = m + 1 < grid.cells();
    if left {
        a.diag[m - 1] += w * (1.0 - theta) * (1.0 - theta);
    }
    if right {
        a.diag[m] += w * theta * theta;
    }
    if left && right {
        a.off[m - 1] += w * theta * (1.0 - theta);
    }
}

/// Crank–Nicolson for `M v' = -(K + R) v + f` with `R`, `f` frozen over the
/// step.
#[derive(Clone, Debug)]
pub struct CrankNicolson {
    mass: SymTridiag,
    stiffness: SymTridiag,
}

impl CrankNicolson {
    pub fn new(grid: &Grid) -> Self {
        Self {
            mass: mass_matrix(grid),
            stiffness: stiffness_matrix(grid),
        }
    }

    pub fn mass(&self) -> &SymTridiag {
        &self.mass
    }

    pub fn step(&self, v: &[f64], dt: f64, reaction: &SymTridiag, load: &[f64]) -> Vec<f64> {
        let mut op = self.stiffness.clone();
        op.add_assign_scaled(reaction, 1.0);
        let lhs = self.mass.combine(1.0, &op, 0.5 * dt);
        let rhs_mat = self.mass.combine(1.0, &op, -0.5 * dt);
        let mut rhs = rhs_mat.mul_vec(v);
        for (r, f) in rhs.iter_mut().zip(load) {
            *r += dt * f;
        }
        lhs.solve(&rhs)
    }
}
