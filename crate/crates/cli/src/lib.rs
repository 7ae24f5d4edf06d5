//! Experiment runner for `cvqkd-core`: spec loading, batch orchestration and
//! result files.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{cmd_rates, cmd_simulate, cmd_sweep, cmd_threshold, Aggregate, CommandError};
pub use config::{load_spec, parse_spec, ConfigError, ExperimentSpec, Overrides};
