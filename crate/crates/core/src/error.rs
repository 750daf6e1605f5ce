use std::path::PathBuf;

/// Errors produced anywhere in the training and analysis pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shapes or lengths that do not line up.
    #[error("dimension mismatch: {0}")]
    Shape(String),

    /// A NaN or infinity showed up while evaluating or differentiating `node`.
    #[error("non-finite value in `{node}`")]
    NonFinite { node: String },

    /// An operation was called in a state or with arguments it does not accept.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("insufficient samples: have {have}, need {need}")]
    InsufficientSamples { have: usize, need: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("checkpoint format: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by numerical divergence rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
