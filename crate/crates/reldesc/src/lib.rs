//! File formats, parallel evaluation and the command-line pipeline built on
//! [`reldesc_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod files;
pub mod json;
pub mod parallel;
pub mod pipeline;

pub use config::PipelineConfig;
pub use error::{CliError, Result};
pub use pipeline::{run as run_pipeline, PipelineReport, PipelineRun};
