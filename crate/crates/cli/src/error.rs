use std::path::PathBuf;

use ideaforge::providers::ProviderError;

use crate::Stage;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{stage}: missing input artifact {}", path.display())]
    MissingArtifact { stage: Stage, path: PathBuf },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{stage}: {message}")]
    Validation { stage: Stage, message: String },
    #[error("{stage}: provider failure: {source}")]
    Provider {
        stage: Stage,
        #[source]
        source: ProviderError,
    },
    #[error("{stage}: fetch failed: {message}")]
    Fetch { stage: Stage, message: String },
    #[error("{stage}: {message}")]
    Io { stage: Stage, message: String },
}

impl PipelineError {
    /// 2 for a missing upstream artifact, 3 for invalid configuration or
    /// data, 4 for provider or network failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::MissingArtifact { .. } => 2,
            PipelineError::Config(_) | PipelineError::Validation { .. } => 3,
            PipelineError::Provider { .. } | PipelineError::Fetch { .. } => 4,
            PipelineError::Io { .. } => 1,
        }
    }
}
