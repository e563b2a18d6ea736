use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("{what} did not converge within {iters} iterations")]
    NotConverged { what: &'static str, iters: usize },
    #[error("state matrix is not stable (spectral radius {0})")]
    UnstableA(f64),
    #[error("matrix is singular")]
    Singular,
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix has a negative eigenvalue {0}")]
    NegativeEigenvalue(f64),
    #[error("Gram matrix is singular or ill-conditioned (condition estimate {0:e})")]
    SingularGram(f64),
    #[error("innovation covariance C S C^T + R is singular")]
    SingularInnovations,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("Kalman quantities are undefined for a well-specified model")]
    MissingKalman,
    #[error("operation requires a {expected} model")]
    RegimeMismatch { expected: &'static str },
    #[error("trajectory too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("gradient descent diverged at iteration {0}")]
    Diverged(usize),
    #[error("terminal constraint rows are rank deficient")]
    DegenerateTerminal,
    #[error("KKT system is singular")]
    SingularKkt,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
