//! Command-line front end: run configuration, measurement-table files and
//! the estimation, simulation and figure commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod table_io;

pub use error::{CliError, Result};
