//! Symmetric tridiagonal matrices, the only linear algebra the P1 space needs.

/// Symmetric tridiagonal matrix stored as its diagonal and first off-diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(x.len(), n);
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for (k, &o) in self.off.iter().enumerate() {
            y[k] += o * x[k + 1];
            y[k + 1] += o * x[k];
        }
        y
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &SymTridiag, beta: f64) -> SymTridiag {
        assert_eq!(self.len(), other.len());
        SymTridiag {
            diag: self
                .diag
                .iter()
                .zip(&other.diag)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
            off: self
                .off
                .iter()
                .zip(&other.off)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        }
    }

    pub fn add_assign_scaled(&mut self, other: &SymTridiag, beta: f64) {
        assert_eq!(self.len(), other.len());
        for (a, b) in self.diag.iter_mut().zip(&other.diag) {
            *a += beta * b;
        }
        for (a, b) in self.off.iter_mut().zip(&other.off) {
            *a += beta * b;
        }
    }

    /// Thomas algorithm. The matrices assembled in this crate are SPD, so no
    /// pivoting is needed.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        if n == 0 {
            return Vec::new();
        }
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut denom = self.diag[0];
        if n > 1 {
            c[0] = self.off[0] / denom;
        }
        d[0] = rhs[0] / denom;
        for k in 1..n {
            let sub = self.off[k - 1];
            denom = self.diag[k] - sub * c[k - 1];
            if k + 1 < n {
                c[k] = self.off[k] / denom;
            }
            d[k] = (rhs[k] - sub * d[k - 1]) / denom;
        }
        for k in (0..n - 1).rev() {
            d[k] -= c[k] * d[k + 1];
        }
        d
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
