//! Configuration files, presets, sweeps and the `psbr` command line.

pub mod catalog;
pub mod cli;
pub mod config;
pub mod field;
pub mod run;

pub use config::{load_config, parse_config, ConfigError, ExperimentConfig};
pub use run::{run_experiment, run_sweep, RunError};
