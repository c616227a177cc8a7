//! Simulation and numerical evaluation of Lévy processes conditioned to stay positive.

pub mod charfn;
pub mod conditioned;
pub mod density;
pub mod family;
pub mod fluctuation;
pub mod ladder;
mod mesh;
pub mod pathsim;
pub mod error;
pub mod rng;
pub mod stats;

pub use charfn::{char_exponent, char_function, JumpLaw, LevyModel, ModelDescriptor, ModelKind};
pub use error::{Error, Result};
pub use rng::RngStream;
