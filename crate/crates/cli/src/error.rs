use std::path::{Path, PathBuf};

use mtp_core::describer::DescriberError;
use mtp_core::gateway::GatewayError;
use mtp_core::preprocess::PreprocessError;
use mtp_core::reasoner::ReasonerError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config files or unreadable inputs.
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Invalid data or a failed check.
    #[error("{0}")]
    Failed(String),
    #[error("transport error: {0}")]
    Transport(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Transport(_) => 3,
        }
    }

    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::Config(_) | GatewayError::Cache(_) => CliError::Config(e.to_string()),
            GatewayError::Transport { .. } => CliError::Transport(e.to_string()),
            GatewayError::Input(_) => CliError::Failed(e.to_string()),
        }
    }
}

impl From<ReasonerError> for CliError {
    fn from(e: ReasonerError) -> Self {
        match e {
            ReasonerError::Gateway(g) => g.into(),
            ReasonerError::Bundle(_) | ReasonerError::MissingTracking => {
                CliError::Config(e.to_string())
            }
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<DescriberError> for CliError {
    fn from(e: DescriberError) -> Self {
        match e {
            DescriberError::Gateway(g) => g.into(),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<PreprocessError> for CliError {
    fn from(e: PreprocessError) -> Self {
        match e {
            PreprocessError::Gateway(g) => g.into(),
            PreprocessError::Io { path, source } => CliError::Io { path, source },
            other => CliError::Failed(other.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_class() {
        let transport = GatewayError::Transport {
            attempts: 3,
            source: mtp_core::gateway::BackendError::Transport("down".into()),
        };
        assert_eq!(CliError::from(transport).exit_code(), 3);
        assert_eq!(
            CliError::from(GatewayError::Config("x".into())).exit_code(),
            2
        );
        assert_eq!(
            CliError::from(GatewayError::Input("x".into())).exit_code(),
            1
        );
        assert_eq!(
            CliError::from(ReasonerError::MissingTracking).exit_code(),
            2
        );
    }
}
