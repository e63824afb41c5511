//! Batch front end: configuration, execution, result files and checkpoints.

pub mod check;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod run;

pub use config::{Mode, RunConfig};
pub use error::{CliError, Result};
