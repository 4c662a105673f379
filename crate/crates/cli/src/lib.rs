//! Batch front end for the nlsx pipeline: TOML configuration, stage
//! orchestration, artifact files and frequency sweeps.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod sweep;

pub use config::RunConfig;
pub use error::CliError;
pub use pipeline::{run_pipeline, Summary, Verb};
pub use sweep::{run_sweep, SweepSummary};
