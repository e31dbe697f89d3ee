//! Datasets, TOML configuration, the experiment runner and the `infovae`
//! command-line tool built on `infovae-core`.

pub mod cli;
pub mod config;
pub mod datasets;
pub mod error;
pub mod oracle;
pub mod run;
pub mod scenarios;

pub use config::RunConfig;
pub use error::{LabError, Result};
pub use run::{run_experiment, RunOutcome};
