use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate law: {0}")]
    DegenerateLaw(String),

    #[error("psi_p moment is unbounded for every finite lambda: {0}")]
    UnboundedMoment(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("no admissible constant up to cap {cap}; violating point: {point}")]
    FitFailed { cap: f64, point: String },

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
