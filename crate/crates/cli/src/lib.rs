//! Dataset pipeline driver behind the `causim` command.

pub mod artifacts;
pub mod config;
pub mod pipeline;
pub mod stages;

pub use config::PipelineConfig;
pub use pipeline::{Dataset, Pipeline, Stage, StageError};
