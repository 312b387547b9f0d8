use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integration diverged at step {step}: |state| exceeded {limit:e}")]
    Divergence { step: usize, limit: f64 },

    #[error("kernel weights sum to {sum:e}, below the degenerate threshold")]
    DegenerateWeights { sum: f64 },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("kernel `{0}` has no trainable parameter")]
    UnsupportedKernel(&'static str),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures that come from the numbers rather than from the caller.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. }
                | Error::DegenerateWeights { .. }
                | Error::UndefinedMetric(_)
                | Error::Numeric(_)
        )
    }

    /// Process exit code used by the CLI: 2 for argument errors, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        if self.is_numeric() {
            3
        } else {
            2
        }
    }
}
