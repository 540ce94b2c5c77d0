/// Errors produced by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter is out of its valid range (non-positive dimension,
    /// weight outside the simplex, negative noise variance, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two inputs that must agree in shape do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A matrix that must be Hermitian positive definite failed its
    /// Cholesky factorization.
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// An eigendecomposition did not converge.
    #[error("eigendecomposition failed to converge")]
    EigenFailure,

    /// Every mixture component assigned (numerically) zero likelihood to an
    /// observation, so responsibilities are undefined.
    #[error("degenerate responsibilities: all components have zero likelihood for a sample")]
    DegenerateResponsibilities,

    /// A dataset or model file is malformed.
    #[error("file format error: {0}")]
    Format(String),

    /// An experiment or tool configuration is invalid.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad user-supplied configuration or input
    /// files (as opposed to runtime/numerical failures). Command-line tools
    /// use this to pick their exit status.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::DimensionMismatch(_)
                | Error::Format(_)
                | Error::Config(_)
        )
    }
}
