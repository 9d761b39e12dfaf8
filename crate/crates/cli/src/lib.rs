//! Command-line front end for `contagion-core`.
//!
//! Every command renders its result to a string so that tests can drive the
//! commands without spawning a process; `main` only prints and maps errors to
//! exit codes.

pub mod commands;
pub mod error;
pub mod format;
pub mod spec_file;

pub use commands::{run, Cli, Command};
pub use error::CliError;
pub use spec_file::GroupSpecFile;
