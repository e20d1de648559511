//! Library of initial conditions: eigenfunction and Gaussian-bump voltages,
//! uniform and logistic proportion profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction, NodalField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum VoltageInit {
    /// `amplitude · sin(mode · π (x + ℓ) / 2ℓ)`
    Eigenfunction { amplitude: f64, mode: usize },
    /// Gaussian bump with its boundary values subtracted linearly so that it
    /// vanishes at `±ℓ`.
    Gaussian {
        amplitude: f64,
        center: f64,
        width: f64,
    },
}

impl VoltageInit {
    pub fn build(&self, grid: &Grid) -> Result<GridFunction> {
        match *self {
            Self::Eigenfunction { amplitude, mode } => {
                if mode == 0 {
                    return Err(Error::Config("eigenfunction mode must be >= 1".into()));
                }
                Ok(grid.eigenfunction(mode).scaled(amplitude))
            }
            Self::Gaussian {
                amplitude,
                center,
                width,
            } => {
                if !(width > 0.0) {
                    return Err(Error::Config(format!("bump width must be positive, got {width}")));
                }
                let l = grid.half_length();
                let bump = |x: f64| amplitude * (-(x - center).powi(2) / (2.0 * width * width)).exp();
                let (left, right) = (bump(-l), bump(l));
                Ok(grid.interpolate(|x| {
                    let s = (x + l) / (2.0 * l);
                    bump(x) - (1.0 - s) * left - s * right
                }))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ProportionInit {
    /// Spatially constant proportions, one per state.
    Uniform { values: Vec<f64> },
    /// `(1 - s(x)) · left + s(x) · right` with `s` the logistic function of
    /// `steepness · (x - center)`.
    Logistic {
        left: Vec<f64>,
        right: Vec<f64>,
        center: f64,
        steepness: f64,
    },
}

fn check_simplex(values: &[f64], states: usize) -> Result<()> {
    if values.len() != states {
        return Err(Error::Config(format!(
            "expected {states} proportions, got {}",
            values.len()
        )));
    }
    if values.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::Config(format!("proportions {values:?} leave [0, 1]")));
    }
    let total: f64 = values.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("proportions {values:?} sum to {total}")));
    }
    Ok(())
}

impl ProportionInit {
    /// One nodal field per state, normalized nodewise to sum to one.
    pub fn build(&self, grid: &Grid, states: usize) -> Result<Vec<NodalField>> {
        let point: Box<dyn Fn(f64) -> Vec<f64>> = match self {
            Self::Uniform { values } => {
                check_simplex(values, states)?;
                let v = values.clone();
                Box::new(move |_| v.clone())
            }
            Self::Logistic {
                left,
                right,
                center,
                steepness,
            } => {
                check_simplex(left, states)?;
                check_simplex(right, states)?;
                let (left, right, c, k) = (left.clone(), right.clone(), *center, *steepness);
                Box::new(move |x| {
                    let s = 1.0 / (1.0 + (-k * (x - c)).exp());
                    left.iter()
                        .zip(&right)
                        .map(|(a, b)| (1.0 - s) * a + s * b)
                        .collect()
                })
            }
        };
        let nodes = grid.nodes();
        let mut fields = vec![vec![0.0; nodes.len()]; states];
        for (j, &x) in nodes.iter().enumerate() {
            let p = point(x);
            let total: f64 = p.iter().sum();
            for (xi, f) in fields.iter_mut().enumerate() {
                f[j] = p[xi] / total;
            }
        }
        fields
            .into_iter()
            .map(|values| NodalField::new(*grid, values))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_vanishes_at_ends() {
        let g = Grid::new(1.0, 40).unwrap();
        let v = VoltageInit::Gaussian {
            amplitude: 0.5,
            center: 0.3,
            width: 0.4,
        }
        .build(&g)
        .unwrap();
        assert_eq!(v.eval_at(-1.0).unwrap(), 0.0);
        assert!(v.sup_norm() <= 0.5);
    }

    #[test]
    fn logistic_profile_sums_to_one() {
        let g = Grid::new(1.0, 40).unwrap();
        let p = ProportionInit::Logistic {
            left: vec![0.9, 0.1],
            right: vec![0.2, 0.8],
            center: 0.0,
            steepness: 5.0,
        }
        .build(&g, 2)
        .unwrap();
        for j in 0..=40 {
            let s = p[0].values()[j] + p[1].values()[j];
            assert!((s - 1.0).abs() < 1e-15);
        }
        assert!(p[0].values()[0] > p[0].values()[40]);
    }

    #[test]
    fn rejects_bad_proportions() {
        let g = Grid::new(1.0, 4).unwrap();
        assert!(ProportionInit::Uniform { values: vec![0.5, 0.6] }.build(&g, 2).is_err());
        assert!(ProportionInit::Uniform { values: vec![1.0] }.build(&g, 2).is_err());
    }
}
