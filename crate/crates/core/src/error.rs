//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("position {x} lies outside {domain}")]
    OutOfDomain { x: f64, domain: String },

    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error("image series still contributes {residual:e} after {cap} image pairs")]
    ImageSeries { cap: usize, residual: f64 },

    #[error("invalid kinetics: {0}")]
    InvalidKinetics(String),

    #[error("rate requested for self-transition of state {0}")]
    SelfTransition(usize),

    #[error("step {dt} violates the stability guard: dt * (|E|-1) * alpha_max = {product} > {limit}")]
    StabilityGuard { dt: f64, product: f64, limit: f64 },

    #[error("invariant violated at t = {t}: {what}")]
    Invariant { t: f64, what: String },

    #[error("scale N = {0} places no channel strictly inside the interval")]
    NoChannels(u32),

    #[error("trajectory carries no rate history")]
    MissingRateHistory,

    #[error("sample times of the two trajectories do not match")]
    TimeGridMismatch,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
