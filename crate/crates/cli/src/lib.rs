//! Command-line front end of `sdc-hawkes`: file formats and subcommands.

pub mod args;
pub mod commands;
pub mod error;
pub mod records;

pub use commands::{run, Outcome};
pub use error::{CliError, CliResult};
