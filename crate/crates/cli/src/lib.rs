//! Config-driven runner for the `proxlab-core` probes: reads an experiment file, executes the
//! probes and writes one report record per probe.

pub mod config;
pub mod error;
pub mod function;
pub mod report;
pub mod runner;

pub use config::{ExperimentConfig, Format, LoadedConfig};
pub use error::ConfigError;
pub use runner::{run, RunOptions, RunOutcome};
