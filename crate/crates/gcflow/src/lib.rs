//! Experiment harness for graphs moving by powers of Gauss curvature:
//! TOML configuration, runners for the profile, the evolution and the
//! ratio-bound sweep, CSV output and the `gcflow` command line.
//!
//! The numerics live in [`gcflow_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod report;
pub mod run;

pub use config::{Experiment, ExperimentConfig};
pub use error::{AppError, AppResult, ConfigError};
pub use report::Summary;
