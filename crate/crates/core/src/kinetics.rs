//! Channel state space, conductances, driving potentials and clamped
//! voltage-dependent transition rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One channel state with its conductance `c_ξ` and driving potential `v_ξ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    pub name: String,
    #[serde(rename = "c")]
    pub conductance: f64,
    #[serde(rename = "v")]
    pub driving_potential: f64,
}

/// Unclamped shape of a transition rate as a function of voltage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RateForm {
    Constant { a: f64 },
    /// `a + b / (1 + exp(-k (V - v0)))`
    Sigmoid { a: f64, b: f64, k: f64, v0: f64 },
    /// `a · exp(k V)`
    ExpClamped { a: f64, k: f64 },
}

impl RateForm {
    pub fn from_parts(form: &str, params: &[f64]) -> Result<Self> {
        let want = |n: usize| -> Result<()> {
            if params.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidKinetics(format!(
                    "rate form '{form}' takes {n} parameters, got {}",
                    params.len()
                )))
            }
        };
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidKinetics(format!(
                "non-finite parameter in '{form}'"
            )));
        }
        match form {
            "constant" => {
                want(1)?;
                Ok(Self::Constant { a: params[0] })
            }
            "sigmoid" => {
                want(4)?;
                Ok(Self::Sigmoid {
                    a: params[0],
                    b: params[1],
                    k: params[2],
                    v0: params[3],
                })
            }
            "exp_clamped" => {
                want(2)?;
                Ok(Self::ExpClamped {
                    a: params[0],
                    k: params[1],
                })
            }
            other => Err(Error::InvalidKinetics(format!("unknown rate form '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Constant { .. } => "constant",
            Self::Sigmoid { .. } => "sigmoid",
            Self::ExpClamped { .. } => "exp_clamped",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Self::Constant { a } => vec![a],
            Self::Sigmoid { a, b, k, v0 } => vec![a, b, k, v0],
            Self::ExpClamped { a, k } => vec![a, k],
        }
    }

    pub fn raw(&self, v: f64) -> f64 {
        match *self {
            Self::Constant { a } => a,
            Self::Sigmoid { a, b, k, v0 } => a + b / (1.0 + (-k * (v - v0)).exp()),
            Self::ExpClamped { a, k } => a * (k * v).exp(),
        }
    }

    /// Upper bound on `|d/dV raw(V)|` for `V ∈ [lo, hi]`.
    pub fn lipschitz_bound(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            Self::Constant { .. } => 0.0,
            Self::Sigmoid { b, k, .. } => (b * k).abs() / 4.0,
            Self::ExpClamped { a, k } => (a * k).abs() * (k * lo).exp().max((k * hi).exp()),
        }
    }
}

/// Serialized rate-table entry `{from, to, form, params}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSpec {
    pub from: String,
    pub to: String,
    pub form: String,
    pub params: Vec<f64>,
}

/// Serialized kinetics block of a run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KineticsSpec {
    pub states: Vec<ChannelState>,
    pub rates: Vec<RateSpec>,
    #[serde(default = "default_clamp")]
    pub clamp: [f64; 2],
}

fn default_clamp() -> [f64; 2] {
    [1e-3, 50.0]
}

/// Validated kinetics shared by the deterministic and stochastic models.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelKinetics {
    states: Vec<ChannelState>,
    /// Row-major `|E| × |E|`; diagonal entries are `None`.
    forms: Vec<Option<RateForm>>,
    alpha_min: f64,
    alpha_max: f64,
}

impl ChannelKinetics {
    pub fn from_spec(spec: &KineticsSpec) -> Result<Self> {
        let n = spec.states.len();
        if n < 2 {
            return Err(Error::InvalidKinetics(format!(
                "need at least 2 states, got {n}"
            )));
        }
        for (i, s) in spec.states.iter().enumerate() {
            if spec.states[..i].iter().any(|o| o.name == s.name) {
                return Err(Error::InvalidKinetics(format!("duplicate state '{}'", s.name)));
            }
        }
        let index = |name: &str| -> Result<usize> {
            spec.states
                .iter()
                .position(|s| s.name == name)
                .ok_or_else(|| Error::InvalidKinetics(format!("unknown state '{name}'")))
        };
        let mut forms = vec![None; n * n];
        for r in &spec.rates {
            let (a, b) = (index(&r.from)?, index(&r.to)?);
            if a == b {
                return Err(Error::InvalidKinetics(format!(
                    "self-transition declared for '{}'",
                    r.from
                )));
            }
            if forms[a * n + b].is_some() {
                return Err(Error::InvalidKinetics(format!(
                    "rate {} -> {} declared twice",
                    r.from, r.to
                )));
            }
            forms[a * n + b] = Some(RateForm::from_parts(&r.form, &r.params)?);
        }
        Self::new(spec.states.clone(), forms, spec.clamp[0], spec.clamp[1])
    }

    pub fn new(
        states: Vec<ChannelState>,
        forms: Vec<Option<RateForm>>,
        alpha_min: f64,
        alpha_max: f64,
    ) -> Result<Self> {
        let n = states.len();
        if n < 2 {
            return Err(Error::InvalidKinetics("need at least 2 states".into()));
        }
        if forms.len() != n * n {
            return Err(Error::InvalidKinetics("rate table has wrong shape".into()));
        }
        for a in 0..n {
            for b in 0..n {
                if a != b && forms[a * n + b].is_none() {
                    return Err(Error::InvalidKinetics(format!(
                        "missing rate {} -> {}",
                        states[a].name, states[b].name
                    )));
                }
            }
        }
        if !(alpha_min > 0.0) {
            return Err(Error::InvalidKinetics(format!(
                "alpha_min must be positive, got {alpha_min}"
            )));
        }
        if !(alpha_max >= alpha_min) || !alpha_max.is_finite() {
            return Err(Error::InvalidKinetics(format!(
                "clamp [{alpha_min}, {alpha_max}] is not an interval"
            )));
        }
        if let Some(s) = states.iter().find(|s| !(s.conductance >= 0.0)) {
            return Err(Error::InvalidKinetics(format!(
                "state '{}' has negative conductance {}",
                s.name, s.conductance
            )));
        }
        if states.iter().any(|s| !s.driving_potential.is_finite()) {
            return Err(Error::InvalidKinetics("non-finite driving potential".into()));
        }
        let k = Self {
            states,
            forms,
            alpha_min,
            alpha_max,
        };
        if !(k.v_minus() < 0.0) {
            return Err(Error::InvalidKinetics(format!(
                "need v_- < 0, got {}",
                k.v_minus()
            )));
        }
        if !(k.v_plus() > 0.0) {
            return Err(Error::InvalidKinetics(format!(
                "need v_+ > 0, got {}",
                k.v_plus()
            )));
        }
        Ok(k)
    }

    pub fn to_spec(&self) -> KineticsSpec {
        let n = self.len();
        let mut rates = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if let Some(f) = self.forms[a * n + b] {
                    rates.push(RateSpec {
                        from: self.states[a].name.clone(),
                        to: self.states[b].name.clone(),
                        form: f.name().into(),
                        params: f.params(),
                    });
                }
            }
        }
        KineticsSpec {
            states: self.states.clone(),
            rates,
            clamp: [self.alpha_min, self.alpha_max],
        }
    }

    /// Number of states `|E|`.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[ChannelState] {
        &self.states
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s.name == name)
    }

    pub fn conductance(&self, xi: usize) -> f64 {
        self.states[xi].conductance
    }

    pub fn driving_potential(&self, xi: usize) -> f64 {
        self.states[xi].driving_potential
    }

    pub fn alpha_min(&self) -> f64 {
        self.alpha_min
    }

    pub fn alpha_max(&self) -> f64 {
        self.alpha_max
    }

    pub fn v_minus(&self) -> f64 {
        self.states
            .iter()
            .map(|s| s.driving_potential)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn v_plus(&self) -> f64 {
        self.states
            .iter()
            .map(|s| s.driving_potential)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_conductance(&self) -> f64 {
        self.states.iter().map(|s| s.conductance).fold(0.0, f64::max)
    }

    pub fn max_abs_potential(&self) -> f64 {
        self.states
            .iter()
            .map(|s| s.driving_potential.abs())
            .fold(0.0, f64::max)
    }

    /// Clamped `α_{ξ,ζ}(V)`.
    pub fn rate(&self, from: usize, to: usize, v: f64) -> Result<f64> {
        if from == to {
            return Err(Error::SelfTransition(from));
        }
        Ok(self.rate_unchecked(from, to, v))
    }

    pub(crate) fn rate_unchecked(&self, from: usize, to: usize, v: f64) -> f64 {
        let form = self.forms[from * self.len() + to].expect("validated rate table");
        let r = form.raw(v);
        if r.is_nan() {
            self.alpha_max
        } else {
            r.clamp(self.alpha_min, self.alpha_max)
        }
    }

    /// `α_ξ(V) = Σ_{ζ ≠ ξ} α_{ξ,ζ}(V)`.
    pub fn exit_rate(&self, from: usize, v: f64) -> f64 {
        (0..self.len())
            .filter(|&to| to != from)
            .map(|to| self.rate_unchecked(from, to, v))
            .sum()
    }

    /// Rate matrix `Q[ξ][ζ] = α_{ξ,ζ}(V)` with `Q[ξ][ξ] = -α_ξ(V)`, so every
    /// row sums to zero and `d/dt p = Qᵀ p` is the proportion ODE at a point.
    pub fn generator_matrix(&self, v: f64) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n)
            .map(|a| {
                let mut row: Vec<f64> = (0..n)
                    .map(|b| if a == b { 0.0 } else { self.rate_unchecked(a, b, v) })
                    .collect();
                row[a] = -row.iter().sum::<f64>();
                row
            })
            .collect()
    }

    /// Right-hand side of the proportion ODE at one point: `(Qᵀ p)_ξ`.
    pub fn proportion_drift(&self, p: &[f64], v: f64, out: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(p.len(), n);
        out.iter_mut().for_each(|o| *o = 0.0);
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    let flux = self.rate_unchecked(a, b, v) * p[a];
                    out[b] += flux;
                    out[a] -= flux;
                }
            }
        }
    }

    /// Lipschitz constant of each clamped rate on `[lo, hi]`, row-major with
    /// zeros on the diagonal.
    pub fn lipschitz_constants(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.forms
            .iter()
            .map(|f| f.map_or(0.0, |f| f.lipschitz_bound(lo, hi)))
            .collect()
    }
}

/// Two-state kinetics used as the default scenario: only the open state
/// conducts, with sigmoid opening and closing rates in `[0.05, 5]`.
pub fn default_two_state() -> KineticsSpec {
    KineticsSpec {
        states: vec![
            ChannelState {
                name: "closed".into(),
                conductance: 0.0,
                driving_potential: -0.2,
            },
            ChannelState {
                name: "open".into(),
                conductance: 1.0,
                driving_potential: 1.0,
            },
        ],
        rates: vec![
            RateSpec {
                from: "closed".into(),
                to: "open".into(),
                form: "sigmoid".into(),
                params: vec![0.05, 4.95, 4.0, 0.3],
            },
            RateSpec {
                from: "open".into(),
                to: "closed".into(),
                form: "sigmoid".into(),
                params: vec![0.05, 4.95, -4.0, 0.3],
            },
        ],
        clamp: [0.05, 5.0],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(vc: f64, vo: f64, rate: f64) -> KineticsSpec {
        KineticsSpec {
            states: vec![
                ChannelState {
                    name: "closed".into(),
                    conductance: 0.0,
                    driving_potential: vc,
                },
                ChannelState {
                    name: "open".into(),
                    conductance: 1.0,
                    driving_potential: vo,
                },
            ],
            rates: vec![
                RateSpec {
                    from: "closed".into(),
                    to: "open".into(),
                    form: "constant".into(),
                    params: vec![rate],
                },
                RateSpec {
                    from: "open".into(),
                    to: "closed".into(),
                    form: "constant".into(),
                    params: vec![rate],
                },
            ],
            clamp: [0.01, 10.0],
        }
    }

    #[test]
    fn rejects_nonnegative_v_minus() {
        assert!(ChannelKinetics::from_spec(&two_state(0.0, 1.0, 0.5)).is_err());
        assert!(ChannelKinetics::from_spec(&two_state(-0.2, 1.0, 0.5)).is_ok());
        assert!(ChannelKinetics::from_spec(&two_state(-0.2, -0.1, 0.5)).is_err());
    }

    #[test]
    fn rejects_bad_clamp_and_conductance() {
        let mut s = two_state(-0.2, 1.0, 0.5);
        s.clamp = [0.0, 1.0];
        assert!(ChannelKinetics::from_spec(&s).is_err());
        let mut s = two_state(-0.2, 1.0, 0.5);
        s.states[1].conductance = -1.0;
        assert!(ChannelKinetics::from_spec(&s).is_err());
        let mut s = two_state(-0.2, 1.0, 0.5);
        s.rates.pop();
        assert!(ChannelKinetics::from_spec(&s).is_err());
        let mut s = two_state(-0.2, 1.0, 0.5);
        s.rates[0].form = "cubic".into();
        assert!(ChannelKinetics::from_spec(&s).is_err());
    }

    #[test]
    fn rate_examples() {
        let k = ChannelKinetics::from_spec(&two_state(-0.2, 1.0, 0.5)).unwrap();
        assert_eq!(k.rate(0, 1, 3.0).unwrap(), 0.5);
        assert!(k.rate(1, 1, 0.0).is_err());
        assert_eq!(k.exit_rate(0, -1.0), 0.5);

        let exp = RateForm::ExpClamped { a: 1.0, k: 100.0 };
        let mut ke = k.clone();
        ke.forms[1] = Some(exp);
        assert_eq!(ke.rate(0, 1, 1.0).unwrap(), ke.alpha_max());

        let sig = RateForm::Sigmoid {
            a: 0.1,
            b: 0.8,
            k: 2.0,
            v0: 0.0,
        };
        assert!((sig.raw(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn three_state_exit_rate() {
        let names = ["a", "b", "c"];
        let states = names
            .iter()
            .enumerate()
            .map(|(i, n)| ChannelState {
                name: (*n).into(),
                conductance: i as f64,
                driving_potential: i as f64 - 1.0,
            })
            .collect();
        let forms = (0..9)
            .map(|i| if i % 4 == 0 { None } else { Some(RateForm::Constant { a: 0.5 }) })
            .collect();
        let k = ChannelKinetics::new(states, forms, 1e-3, 50.0).unwrap();
        for xi in 0..3 {
            assert_eq!(k.exit_rate(xi, 0.3), 1.0);
        }
    }

    #[test]
    fn generator_rows_sum_to_zero_and_equilibrium() {
        let k = ChannelKinetics::from_spec(&two_state(-0.2, 1.0, 0.5)).unwrap();
        let q = k.generator_matrix(0.0);
        let mut drift = [0.0; 2];
        k.proportion_drift(&[0.5, 0.5], 0.0, &mut drift);
        assert_eq!(drift, [0.0, 0.0]);
        for row in q {
            assert_eq!(row.iter().sum::<f64>(), 0.0);
        }
    }

    #[test]
    fn spec_roundtrip() {
        let k = ChannelKinetics::from_spec(&default_two_state()).unwrap();
        let k2 = ChannelKinetics::from_spec(&k.to_spec()).unwrap();
        assert_eq!(k, k2);
    }
}
