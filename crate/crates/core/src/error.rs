use thiserror::Error;

/// Errors raised by the simulation core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("{what} index {index} out of range (0..{len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid perturbation parameters: {0}")]
    InvalidParameters(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "eigensolver did not converge after {iterations} iterations (residuals {residuals:?})"
    )]
    ConvergenceFailure {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("topological sector is ambiguous: projected loop commutator norm {0:e}")]
    SectorAmbiguous(f64),

    #[error("Renyi index must be non-negative, got {0}")]
    NegativeAlpha(f64),

    #[error("size cap exceeded: {0}")]
    CapExceeded(String),

    #[error("not solvable by free fermions: {0}")]
    Unsupported(String),

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}

pub type Result<T> = std::result::Result<T, Error>;
