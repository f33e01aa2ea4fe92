//! Experiment orchestration for the matrix-completion toolkit: config
//! parsing, dataset loading, and the subcommand implementations.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod manifest;

pub use commands::{
    cmd_construct_weights, cmd_estimate_sampling, cmd_experiment, cmd_fairness, cmd_fit,
    cmd_generate, ExperimentStatus,
};
pub use config::{parse_config, DatasetConfig, ExperimentConfig};
