//! Library side of the `fracdnl` command-line tool.

pub mod commands;
pub mod config;
mod error;
pub mod formats;

pub use error::CliError;
