//! Batch pipeline for chainshell: stage functions, TOML configuration,
//! run manifests and the summary report used by the `chainshell` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod pipeline;
pub mod report;
pub mod stages;

use thiserror::Error;

pub use config::PipelineConfig;
pub use pipeline::{run_pipeline, RunManifest, RunStatus};

/// Failures surfaced to the command line, each with its exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {error:#}")]
    Stage { stage: String, error: anyhow::Error },
}

impl CliError {
    pub fn stage(stage: impl Into<String>, error: impl Into<anyhow::Error>) -> Self {
        CliError::Stage {
            stage: stage.into(),
            error: error.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage { .. } => 3,
        }
    }
}
