use thiserror::Error;

/// Errors produced by the graph-learning toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index error: {0}")]
    Index(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("solver diverged at iteration {iteration}: {reason}")]
    Divergence { iteration: usize, reason: String },

    #[error("matrix error: {0}")]
    Matrix(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for failures of the numerical kind (divergence, factorization).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Divergence { .. } | Error::Matrix(_))
    }

    /// True for malformed input data (as opposed to configuration or usage).
    pub fn is_data(&self) -> bool {
        matches!(
            self,
            Error::Data(_) | Error::Dimension(_) | Error::Io { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
