use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("Bose function has a pole at x = 0")]
    BosePole,

    #[error("outside the supported temperature regime: {0}")]
    Regime(String),

    #[error("rate integral diverges at small energy transfer for {0}")]
    InfraredDivergence(String),

    #[error("quadrature did not converge: estimated relative error {achieved:.3e} > {requested:.3e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    #[error("Neumann series stopped contracting after {terms} terms")]
    NeumannNonConvergence { terms: usize },

    #[error("linear system is singular")]
    Singular,

    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("grid is not symmetric under x -> -x")]
    AsymmetricGrid,

    #[error("power-law fit needs at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("power-law fit needs positive values, got {0}")]
    NonPositive(f64),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Numerical failures, as opposed to bad input or regime violations.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureNonConvergence { .. }
                | Error::NeumannNonConvergence { .. }
                | Error::Singular
                | Error::NotSymmetric(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
