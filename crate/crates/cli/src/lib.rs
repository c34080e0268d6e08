//! Experiment runner for the `prn` binary: TOML configs, the commands, and
//! a small SVG plotter.

pub mod config;
pub mod error;
pub mod experiment;
pub mod svg;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
