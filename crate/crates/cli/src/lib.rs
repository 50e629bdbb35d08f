//! Experiment driver for the neural predictive monitors: configuration,
//! experiment bundles, the pipeline stages and their reports.

pub mod bundle;
pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod reports;

pub use error::CliError;
