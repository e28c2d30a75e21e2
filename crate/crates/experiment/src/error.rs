use std::path::PathBuf;

/// Errors of the experiment layer. Each maps to a CLI exit code.
#[derive(Debug, thiserror::Error)]
pub enum ExpError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] minnorm_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("acceptance check failed: {0}")]
    Check(String),
}

impl ExpError {
    pub fn config(msg: impl Into<String>) -> Self {
        ExpError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ExpError::Io { path: path.into(), source }
    }

    /// 1 for configuration problems, 2 for numeric or runtime failures,
    /// 3 for failed `--assert` checks.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExpError::Config(_) => 1,
            ExpError::Core(minnorm_core::Error::Parse { .. } | minnorm_core::Error::Domain(_)) => 1,
            ExpError::Core(_) | ExpError::Io { .. } => 2,
            ExpError::Check(_) => 3,
        }
    }
}

pub type ExpResult<T> = std::result::Result<T, ExpError>;
