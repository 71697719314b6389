//! Error type shared by all modules.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("diagonal block {index} is not Hermitian (relative defect {defect:.3e})")]
    NonHermitianBlock { index: usize, defect: f64 },

    #[error("coupling block {index} is numerically singular (singular value ratio {ratio:.3e})")]
    SingularCoupling { index: usize, ratio: f64 },

    #[error("twist parameter z must be nonzero")]
    ZeroTwist,

    #[error("matrix is numerically singular")]
    SingularMatrix,

    #[error("energy lies on the spectrum; resolvent is undefined")]
    ResolventAtEigenvalue,

    #[error("eigensolver failed to converge")]
    ConvergenceFailure,

    #[error("corner block G(1,N) is singular at this energy")]
    CornerSingular,

    #[error("z is an eigenvalue of T(E); the transfer resolvent is undefined (residual {residual:.3e})")]
    TransferEigenvalueHit { residual: f64 },

    #[error("eigenvalue pairing is ambiguous: {0}")]
    AmbiguousPairing(String),

    #[error("integrand positivity violated at phi={phi:.6}: phase defect {defect:.3e}")]
    PositivityViolation { phi: f64, defect: f64 },

    #[error("invalid chain data: {0}")]
    ChainFormat(String),
}
