//! Batch front-end for `krotov-core`: TOML run configurations, the
//! `optimize` / `propagate` / `landscape` / `spectrum` runners and their
//! columnar output files.

pub mod config;
pub mod error;
pub mod run;

pub use config::RunConfig;
pub use error::CliError;
pub use run::{run_command, Command, RunOptions, RunSummary};
