use thiserror::Error;

/// Failures raised by model construction, numerics and samplers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("grid coverage insufficient: {0}")]
    GridCoverage(String),
    #[error("inversion accuracy: negative lobe {lobe:e} exceeds tolerance {tol:e}")]
    InversionAccuracy { lobe: f64, tol: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("time {0} is not a node of the path grid")]
    GridAlignment(f64),
    #[error("path is not a bridge: endpoint differs from start by {0:e}")]
    NotABridge(f64),
    #[error("bridge degeneracy: kernel value {value:e} below floor")]
    BridgeDegeneracy { value: f64 },
    #[error("increment sampler needs a density table for this model")]
    RequiresDensity,
    #[error("closed-form renewal function unavailable: {0}")]
    RequiresMonteCarlo(String),
    #[error("insufficient sample: {0}")]
    InsufficientSample(String),
    #[error("suspicious zero estimate: {0}")]
    SuspiciousZero(String),
    #[error("inconsistent estimates: {0}")]
    Inconsistent(String),
    #[error("Monte Carlo budget exhausted: {0}")]
    Budget(String),
}

pub type Result<T> = core::result::Result<T, Error>;
