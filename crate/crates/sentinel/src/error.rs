use std::path::PathBuf;

use ltv_sentinel_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{what}: {source}")]
    Context {
        what: String,
        #[source]
        source: Box<AppError>,
    },
}

impl AppError {
    /// Process exit code: 1 for usage/config/IO problems, 2 for numerical
    /// failures and 3 for a diverging simulation.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) | AppError::Config(_) | AppError::Io { .. } => 1,
            AppError::Context { source, .. } => source.exit_code(),
            AppError::Core(e) => match e {
                CoreError::Dimension { .. } | CoreError::Config(_) => 1,
                CoreError::Divergence { .. } => 3,
                CoreError::Factorization { .. }
                | CoreError::Numerical { .. }
                | CoreError::Infeasible { .. }
                | CoreError::NotIdentifiable { .. }
                | CoreError::InsufficientData { .. }
                | CoreError::NoCandidate { .. } => 2,
            },
        }
    }

    pub fn context(self, what: impl Into<String>) -> Self {
        AppError::Context {
            what: what.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }
}
