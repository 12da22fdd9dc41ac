use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("no interior lattice point at resolution N = {n} with layer depth K = {depth}")]
    EmptyInterior { n: usize, depth: usize },

    #[error("resolution N = {n} is too coarse for layer depth K = {depth} (need N >= {min})")]
    ResolutionTooCoarse { n: usize, depth: usize, min: usize },

    #[error("spacing h = {0} is not the reciprocal of a positive integer")]
    InvalidSpacing(f64),

    #[error("symbol sum_i kappa_i r^i is not positive on (0, 2): fails at r = {r}")]
    CoefficientSign { r: f64 },

    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),

    #[error("layer depth K = {depth} is smaller than the operator order {order}")]
    InsufficientDepth { depth: usize, order: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("node is not an interior lattice point")]
    NotInterior,

    #[error("linear solve failed: {0}")]
    SolveFailure(String),

    #[error(
        "quadrature did not reach rel_tol = {rel_tol:e} (estimated relative error {estimate:e})"
    )]
    QuadratureNotConverged { rel_tol: f64, estimate: f64 },

    #[error("iteration did not converge after {iterations} steps")]
    NoConvergence { iterations: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
