//! Scenario runner for the `maclim` library: JSON scenarios in, CSV and
//! JSON artifacts out.

pub mod error;
pub mod output;
pub mod run;
pub mod scenario;

pub use error::{CliError, Result};
