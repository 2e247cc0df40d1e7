//! Batch entry points for the city pipeline: map synthesis and resampling,
//! mesh ingest, world building, camera sampling, rendering, statistics, an
//! end-to-end `pipeline run` and the HTTP service.

pub mod cli;
pub mod commands;
mod io;
pub mod pipeline;

pub use pipeline::{run_pipeline, run_pipeline_with, Artifact, PipelineConfig, PipelineManifest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("stage {stage} failed: {cause}")]
    Stage { stage: &'static str, cause: String },
}

impl CliError {
    pub fn stage(stage: &'static str, cause: impl ToString) -> Self {
        CliError::Stage {
            stage,
            cause: cause.to_string(),
        }
    }

    /// 2 for configuration problems, 3 for stage failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage { .. } => 3,
        }
    }
}
