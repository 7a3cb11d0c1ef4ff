//! Prepare, train, predict, select and evaluate from one JSON run config.

pub mod commands;
pub mod config;
pub mod error;

pub use config::{load_config, RunConfig};
pub use error::{CliError, CliResult};
