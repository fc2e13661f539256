use std::path::PathBuf;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_ACCEPTANCE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_HALT: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("format: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Numerical failure after stepping began.
    #[error("numerical halt: {0}")]
    Halt(kfl_core::Error),
    #[error(transparent)]
    Core(#[from] kfl_core::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Halt(_) => EXIT_HALT,
            Self::Core(kfl_core::Error::PositivityLoss { .. })
            | Self::Core(kfl_core::Error::NoConvergence)
            | Self::Core(kfl_core::Error::Quadrature(_)) => EXIT_HALT,
            _ => EXIT_CONFIG,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
