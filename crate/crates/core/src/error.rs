use thiserror::Error;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Inconsistent or inadmissible problem data.
    Validation,
    /// A linear solve failed or produced non-finite numbers.
    Solver,
    /// Malformed input text (expressions, tables).
    Parse,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid: {0}")]
    Grid(String),
    #[error("spec: {0}")]
    Spec(String),
    #[error("shape mismatch: {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("initial density negative: min {min:e} below tolerance")]
    NegativeDensity { min: f64 },
    #[error("initial density mass {mass:.17e} differs from 1 by more than {tol:e}")]
    MassMismatch { mass: f64, tol: f64 },
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("singular step matrix at step {step} (pivot column {column})")]
    Singular { step: usize, column: usize },
    #[error("non-finite state at step {step}")]
    NonFiniteState { step: usize },
    #[error("non-finite objective or gradient at iteration {iter}; iterate: {dump:?}")]
    NonFiniteIterate { iter: usize, dump: Vec<f64> },
    #[error("expression: {0}")]
    Expr(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Singular { .. }
            | Error::NonFiniteState { .. }
            | Error::NonFiniteIterate { .. } => ErrorKind::Solver,
            Error::Expr(_) => ErrorKind::Parse,
            _ => ErrorKind::Validation,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
