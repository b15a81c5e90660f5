use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("invalid LRP rule: {0}")]
    InvalidRule(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    TrainingDiverged { epoch: usize },

    #[error("metric {metric}: {reason}")]
    Metric { metric: &'static str, reason: String },

    #[error("insufficient correctly predicted samples: need {needed}, found {found}")]
    InsufficientSamples { needed: usize, found: usize },

    #[error("corrupt or incompatible artifact {path}: {reason}")]
    Artifact { path: PathBuf, reason: String },

    #[error("stage order violation: `{stage}` requires {missing}")]
    StageOrder { stage: &'static str, missing: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn metric(metric: &'static str, reason: impl Into<String>) -> Self {
        Error::Metric {
            metric,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn artifact(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Artifact {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag, used by the CLI's error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::Unsupported(_) => "unsupported",
            Error::InvalidRule(_) => "invalid_rule",
            Error::Config(_) => "config",
            Error::TrainingDiverged { .. } => "training_diverged",
            Error::Metric { .. } => "metric",
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::Artifact { .. } => "artifact",
            Error::StageOrder { .. } => "stage_order",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
