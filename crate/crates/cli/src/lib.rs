//! Command-line pipelines: configuration, file formats and the 1D/2D experiments.

pub mod audio;
pub mod commands;
pub mod config;
pub mod error;
pub mod image;
pub mod io;

pub use commands::{run, Cli, Command};
pub use error::{CliError, CliResult};
