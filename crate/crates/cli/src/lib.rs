//! Command-line front end: config files, scenario assembly, runs, sweeps
//! and reports.

pub mod config;
pub mod error;
pub mod inputs;
pub mod report;
pub mod run;

pub use config::{Mode, RunConfig};
pub use error::Failure;
