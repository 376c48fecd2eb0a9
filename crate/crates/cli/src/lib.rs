//! Experiment drivers and output writers behind the `ttpeel` binary.

pub mod app;
pub mod error;
pub mod experiments;
pub mod output;

pub use app::{run, Cli, Command, GlobalArgs};
pub use error::{CliError, Result};
