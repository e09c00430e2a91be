use thiserror::Error;

/// Errors raised by operator construction and the coding-theorem routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("operator is not Hermitian: max asymmetry |A - A^H| = {max_asymmetry:.3e}")]
    NotHermitian { max_asymmetry: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid projector: {0}")]
    InvalidProjector(String),

    #[error("invalid subsystem shape: {0}")]
    InvalidShape(String),

    #[error("channel is not trace preserving: max |sum K^H K - I| = {deviation:.3e}")]
    NotTracePreserving { deviation: f64 },

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("gamma window [{lo}, {hi}] does not bracket the crossing; widen window")]
    WindowTooNarrow { lo: f64, hi: f64 },

    #[error("unsupported structure: {0}")]
    Unsupported(String),

    #[error("rate window below all eigenvalues: compression projector is empty")]
    EmptyProjector,

    #[error("threshold too high: every codeword projector is zero")]
    ThresholdTooHigh,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
