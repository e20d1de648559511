//! Hybrid stochastic/deterministic simulation of generalized Hodgkin–Huxley
//! axon models on `I = [-ℓ, ℓ]`.
//!
//! The deterministic model couples a reaction–diffusion PDE for the membrane
//! potential to per-point proportion ODEs. The stochastic model replaces the
//! proportions by finitely many Markov-jumping channels at the lattice sites
//! `i/N`, each feeding a Dirac source of weight `1/N` into the PDE. The crate
//! provides both integrators, Sobolev norms to compare them, the martingale
//! decomposition of the channel empirical measures, and a sweep harness that
//! measures convergence as `N` grows.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod decomposition;
pub mod deterministic;
pub mod error;
pub mod export;
pub mod fem;
pub mod grid;
pub mod harness;
pub mod initial;
pub mod kinetics;
pub mod linalg;
pub mod rng;
pub mod semigroup;
pub mod stochastic;
pub mod validation;

pub use error::{Error, Result};
pub use grid::{Functional, Grid, GridFunction, NodalField};
pub use kinetics::{ChannelKinetics, KineticsSpec};
