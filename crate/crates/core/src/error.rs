use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("degenerate direction vector (zero or non-finite norm)")]
    DegenerateDirection,

    #[error("non-finite log-density at point {point:?}")]
    Numerical { point: Vec<f64> },

    #[error("sample size {0} is odd; cannot split into equal halves")]
    OddSample(usize),

    #[error("sample size {got} is below the required minimum {min}")]
    Size { got: usize, min: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("no draws above the HPD threshold")]
    EmptyHpd,

    #[error("every covering candidate was rejected; no ellipsoid accepted")]
    DegenerateCovering,

    #[error("no evaluation draws fall inside the instrumental support")]
    EmptySupport,

    #[error("sample covariance is singular or not positive definite")]
    SingularCovariance,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
