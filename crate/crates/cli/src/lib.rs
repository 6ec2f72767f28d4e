//! Experiment harness for `poisson-sparse`.
//!
//! A run is described by a JSON config (see [`config`]), executed by one of
//! the registered experiments (see [`experiments`]) and written as CSV plus a
//! JSON summary (see [`output`]).

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::{Estimator, ExperimentConfig, RawConfig};
pub use error::CliError;
pub use experiments::{default_config, execute, list_experiments, run_config_file, run_experiment};
pub use output::{ExperimentOutput, Manifest, TrialRecord};
