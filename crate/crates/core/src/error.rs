use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the factorization toolkit.
///
/// See [`Error::is_certification_failure`] for the split between bad input
/// and failed certification.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("rank-deficient subspace basis: numerical rank {rank} < {columns} columns")]
    RankDeficient { rank: usize, columns: usize },

    #[error("enumeration over dimension {dim} exceeds the capacity cap {cap}")]
    Capacity { dim: usize, cap: usize },

    #[error("empty operator list")]
    EmptyList,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error(
        "partial sum over the first {prefix} blocks has norm {norm:.6e}, exceeding K*|T| = {bound:.6e}"
    )]
    PartialSumBound { prefix: usize, norm: f64, bound: f64 },

    #[error(
        "Auerbach iteration stalled after {cycles} cycles (unit {unit:.3e}, biorthogonality {biorth:.3e}, dual {dual:.3e})"
    )]
    Convergence {
        cycles: usize,
        unit: f64,
        biorth: f64,
        dual: f64,
        last: Box<crate::auerbach::AuerbachSystem>,
    },

    #[error("approximant {index} has norm {norm:.6e}, exceeding C*|T| = {bound:.6e}")]
    NormBound { index: usize, norm: f64, bound: f64 },

    #[error("tolerance {eps:.6e} not reached: final residual {residual:.6e}")]
    EpsilonNotReached { eps: f64, residual: f64 },

    #[error("oracle contract violated at step {step}: {reason}")]
    Protocol { step: usize, reason: String },

    #[error("simplex did not terminate within {0} pivots")]
    PivotLimit(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a certified inequality, as opposed to bad input.
    pub fn is_certification_failure(&self) -> bool {
        matches!(
            self,
            Error::Convergence { .. }
                | Error::NormBound { .. }
                | Error::EpsilonNotReached { .. }
                | Error::Protocol { .. }
        )
    }
}
