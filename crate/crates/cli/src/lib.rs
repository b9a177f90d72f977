//! Configuration, subcommands and study drivers behind the `bfloat` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod scenario;
pub mod study;

pub use config::CliConfig;
pub use error::{CliError, CliResult};
