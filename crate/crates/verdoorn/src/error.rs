use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] verdoorn_core::error::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Problems with the inputs or configuration, as opposed to failures
    /// inside an estimation.
    pub fn is_validation(&self) -> bool {
        use verdoorn_core::error::Error as C;
        match self {
            Error::Parse { .. } | Error::Config(_) | Error::Io { .. } | Error::Json(_) => true,
            Error::Core(c) => matches!(
                c,
                C::Schema(_) | C::Integrity(_) | C::Domain(_) | C::Parameter(_) | C::MixedMetrics
            ),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
