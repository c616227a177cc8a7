//! Batch runner for the levy-core experiments: manifests, output files and the
//! experiment catalog behind the `levy-lab` binary.

pub mod experiments;
pub mod io;
pub mod manifest;

pub use experiments::{run_experiment, Outcome};
pub use manifest::{Experiment, ExperimentManifest, CATALOG};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "LEVY_LAB_OUT";

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    /// Bad manifest, flag or experiment name (exit status 2).
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] levy_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Usage(_) => 2,
            _ => 1,
        }
    }
}
