//! Command-line harness: configuration, dataset ingestion, experiment
//! runners and result emission for the `fhp` binary.

pub mod config;
pub mod error;
pub mod ingest;
pub mod report;
pub mod runner;
pub mod stats;

pub use config::{load_config, Command, FlagOverrides, RunConfig};
pub use error::{HarnessError, Result};
pub use ingest::ingest_dataset;
pub use runner::{compute, execute, run_monte_carlo};
