use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure in {context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: hmf_core::Error,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LabError {
    pub fn numerical(context: impl Into<String>) -> impl FnOnce(hmf_core::Error) -> Self {
        let context = context.into();
        move |source| LabError::Numerical { context, source }
    }

    /// 1 for configuration and output-location problems, 2 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            LabError::Config(_) | LabError::Io { .. } => 1,
            LabError::Numerical { .. } => 2,
        }
    }
}
