//! Figure-style experiments: configuration, runners and lossless output.

pub mod config;
pub mod output;
mod runners;

pub use config::{ExperimentConfig, ExperimentKind, OutputFormat, Preset};
pub use output::{version, ExperimentOutput, Metadata, Table};
pub use runners::run_experiment;
