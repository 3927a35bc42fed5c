//! Crate-wide error type.

/// Errors raised by the solver library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "blocks are not simultaneously diagonalizable by the given transform: \
         off-diagonal residue {residue:.3e} exceeds {tol:.1e}"
    )]
    NotSimultaneouslyDiagonalizable { residue: f64, tol: f64 },

    #[error("block {index} is not symmetric (defect {defect:.3e})")]
    NonSymmetricBlock { index: usize, defect: f64 },

    #[error(
        "singular preconditioner: circulant eigenvalue {value} lies on the closed \
         negative real axis (operator violates the diagonal-dominance assumption)"
    )]
    SingularPreconditioner { value: num_complex::Complex64 },

    #[error(
        "numerical breakdown: imaginary residue {residue:.3e} of a nominally real \
         result exceeds the hard limit {limit:.1e}"
    )]
    NumericalBreakdown { residue: f64, limit: f64 },

    #[error("matvec callback is not symmetric: probe defect {defect:.3e}")]
    ContractViolation { defect: f64 },

    #[error("preconditioner is not positive definite: <P^-1 r, r> = {value:.3e}")]
    NotSpd { value: f64 },

    #[error("dense oracle size guard exceeded: MN = {mn} > {guard}")]
    SizeGuard { mn: usize, guard: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
