//! Batch front end for the `lcnn` library: configuration, synthetic data, and the `synth`,
//! `sample`, `verify`, `bounds` and `regret` commands.

pub mod commands;
pub mod config;
pub mod dataio;
pub mod error;
pub mod output;

pub use config::{ExperimentConfig, Overrides};
pub use error::{CliError, Result};
