//! JSON run configuration and the shipped default scenario.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::deterministic::DeterministicState;
use crate::error::{Error, Result};
use crate::grid::{Grid, NodalField};
use crate::initial::{ProportionInit, VoltageInit};
use crate::kinetics::{default_two_state, ChannelKinetics, KineticsSpec};
use crate::stochastic::{init_channels, InitMode, StochasticState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialSpec {
    pub voltage: VoltageInit,
    pub proportions: ProportionInit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub half_length: f64,
    pub horizon: f64,
    pub cells: usize,
    pub dt: f64,
    pub kinetics: KineticsSpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub sweep: Vec<u32>,
    #[serde(default = "one")]
    pub replicates: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub init_mode: InitMode,
    /// Keep every `sample_stride`-th time step as a sample.
    #[serde(default = "one_usize")]
    pub sample_stride: usize,
}

fn one() -> u32 {
    1
}

fn one_usize() -> usize {
    1
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("half_length", self.half_length),
            ("horizon", self.horizon),
            ("dt", self.dt),
        ];
        for (name, x) in positive {
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {x}")));
            }
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be positive".into()));
        }
        if self.sweep.windows(2).any(|w| w[0] >= w[1]) || self.sweep.first() == Some(&0) {
            return Err(Error::Config(format!(
                "sweep must be strictly increasing and positive, got {:?}",
                self.sweep
            )));
        }
        let grid = self.grid()?;
        let kinetics = self.kinetics()?;
        let v0 = self.initial.voltage.build(&grid)?;
        let (lo, hi) = (kinetics.v_minus(), kinetics.v_plus());
        if let Some(&x) = v0.values().iter().find(|&&x| x < lo || x > hi) {
            return Err(Error::Config(format!("initial voltage {x} outside [{lo}, {hi}]")));
        }
        self.initial.proportions.build(&grid, kinetics.len())?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.half_length, self.cells)
    }

    pub fn kinetics(&self) -> Result<ChannelKinetics> {
        ChannelKinetics::from_spec(&self.kinetics)
    }

    /// Same scenario with `M` doubled and `Δt` halved.
    pub fn refined(&self) -> Self {
        Self {
            cells: 2 * self.cells,
            dt: 0.5 * self.dt,
            sample_stride: 2 * self.sample_stride,
            ..self.clone()
        }
    }

    pub fn initial_proportions(&self) -> Result<Vec<NodalField>> {
        let grid = self.grid()?;
        self.initial.proportions.build(&grid, self.kinetics.states.len())
    }

    pub fn initial_det_state(&self) -> Result<DeterministicState> {
        let grid = self.grid()?;
        DeterministicState::new(self.initial.voltage.build(&grid)?, self.initial_proportions()?)
    }

    pub fn initial_stoch_state(&self, n: u32, seed: u64) -> Result<StochasticState> {
        let grid = self.grid()?;
        let channels = init_channels(n, self.half_length, &self.initial_proportions()?, self.init_mode, seed)?;
        StochasticState::new(self.initial.voltage.build(&grid)?, channels)
    }

    /// SHA-256 of the compact JSON serialization.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// `ℓ = 1`, `T = 2`, `M = 200`, `Δt = 10⁻³`, the two-state sigmoid kinetics,
/// `v₀ = 0.5 φ₁` and `p₀ = (0.7, 0.3)`.
pub fn default_scenario() -> RunConfig {
    RunConfig {
        half_length: 1.0,
        horizon: 2.0,
        cells: 200,
        dt: 1e-3,
        kinetics: default_two_state(),
        initial: InitialSpec {
            voltage: VoltageInit::Eigenfunction {
                amplitude: 0.5,
                mode: 1,
            },
            proportions: ProportionInit::Uniform {
                values: vec![0.7, 0.3],
            },
        },
        sweep: vec![25, 50, 100, 200, 400, 800],
        replicates: 16,
        seed: 20_240_601,
        output_dir: Some("results".into()),
        init_mode: InitMode::Stratified,
        sample_stride: 1,
    }
}
