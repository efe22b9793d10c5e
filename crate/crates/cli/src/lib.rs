//! Library side of the `foa` command: configuration parsing, exit-code
//! mapping and the subcommands themselves.

pub mod commands;
pub mod config;
pub mod error;

pub use config::{parse_config, RunConfig};
pub use error::CliError;
