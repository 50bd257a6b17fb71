//! Command-line front end: configuration, study commands, CSV/JSON output and SVG plots.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;

pub use commands::{apply_overrides, execute, run_study, Overrides, Study};
pub use config::{parse_config, parse_str, RunConfig};
pub use error::CliError;
