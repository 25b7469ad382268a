use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{stage}: missing input {}", path.display())]
    Dependency { stage: String, path: PathBuf },
    #[error("{stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: anyhow::Error,
    },
    #[error("{} is locked by another run", .0.display())]
    Locked(PathBuf),
}

impl CliError {
    pub fn stage(stage: impl Into<String>, source: impl Into<anyhow::Error>) -> Self {
        CliError::Stage { stage: stage.into(), source: source.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Dependency { .. } => 3,
            CliError::Stage { .. } | CliError::Locked(_) => 4,
        }
    }
}
