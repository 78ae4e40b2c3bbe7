use thiserror::Error;

pub type Result<T> = std::result::Result<T, NarxError>;

#[derive(Debug, Error)]
pub enum NarxError {
    /// A configuration value is out of its valid range.
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// Input data is malformed or incompatible (lengths, missing artifacts, constant signals).
    #[error("data error: {0}")]
    Data(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    /// Numerical blow-up. `step` is the integration step or training epoch.
    #[error("divergence in {stage} at step {step}")]
    Divergence { stage: String, step: usize },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// An input artifact no longer matches the hash recorded in the manifest.
    #[error("stale artifact `{name}`: manifest hash {expected}, file hash {actual}")]
    StaleArtifact {
        name: String,
        expected: String,
        actual: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl NarxError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        NarxError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        NarxError::Shape {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        NarxError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code used by the CLI: 2 config, 3 data, 4 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            NarxError::Config { .. } | NarxError::Json(_) => 2,
            NarxError::Divergence { .. } => 4,
            NarxError::Data(_)
            | NarxError::Shape { .. }
            | NarxError::UndefinedMetric(_)
            | NarxError::StaleArtifact { .. }
            | NarxError::Io { .. } => 3,
        }
    }
}
