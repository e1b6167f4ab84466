use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Core(#[from] topopreserve::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("plot rendering failed: {0}")]
    Plot(String),
    #[error("{invalid} of {total} cells exceeded the failed-trial threshold")]
    NumericalFailure { invalid: usize, total: usize },
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    /// Process exit code: 2 for config errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use topopreserve::Error as E;
        match self {
            HarnessError::ConfigInvalid(_) => 2,
            HarnessError::NumericalFailure { .. } => 3,
            HarnessError::Core(E::SingularGram { .. } | E::Overflow { .. } | E::EigenFailure | E::QuadratureFailure(_)) => 3,
            HarnessError::Core(_) => 2,
            HarnessError::Io { .. } | HarnessError::Json(_) | HarnessError::Plot(_) => 1,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
