//! Command-line driver for the Floquet pole and scattering solvers.

pub mod config;
pub mod export;
pub mod run;

pub use config::{ConfigError, Mode, RunConfig};
pub use run::{run, Outcome, RunError, RunOptions};
