use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("unknown experiment id `{0}`")]
    UnknownId(String),
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("simulation failed: {0}")]
    Sim(#[from] phasor_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{failed} of {total} cells failed")]
    PartialFailure { failed: usize, total: usize },
}

impl LabError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code: 1 validation, 2 runtime, 3 partial sweep.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::UnknownId(_) | Self::Config { .. } => 1,
            Self::PartialFailure { .. } => 3,
            _ => 2,
        }
    }
}

pub type LabResult<T> = std::result::Result<T, LabError>;
