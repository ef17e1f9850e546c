//! File formats, artifact export, validation suites and sweeps for the
//! `safeland` command-line tool.

pub mod commands;
pub mod error;
pub mod export;
pub mod oracle;
pub mod scenario_file;
pub mod sweep;
pub mod validate;

pub use error::{CliError, Result};
