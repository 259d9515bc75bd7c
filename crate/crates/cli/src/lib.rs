//! Batch front end for the solver core: config parsing, subcommand
//! pipelines and artifact writers.

pub mod artifacts;
pub mod config;
pub mod run;

pub use config::{parse_config, ConfigError, ExperimentConfig};
pub use run::{run, Command, RunError, RunOptions, RunSummary};
