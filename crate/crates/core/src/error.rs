//! Error types shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix is singular or rank-deficient: {0}")]
    Singular(&'static str),

    #[error("rank-deficient basis passed to projector construction")]
    RankDeficientBasis,

    #[error("gauge mass must be positive, got {0}")]
    NonPositiveGaugeMass(f64),

    #[error("non-finite state encountered at step {step}")]
    NonFinite { step: usize },

    #[error("run aborted at step {step}: {reason}")]
    Aborted { step: usize, reason: String },

    #[error("invalid spin quantum number {0}: 2j must be a positive integer")]
    InvalidSpin(f64),

    #[error("operator is not Hermitian (max asymmetry {0:.3e})")]
    NonHermitian(f64),

    #[error("jump probability {0} outside [0,1]; decrease dt")]
    BadProbability(f64),

    #[error("spectral density must be positive, got {0}")]
    NonPositiveSpectralDensity(f64),

    #[error("steady space is degenerate ({0} null directions)")]
    DegenerateSteadyState(usize),

    #[error("iterative solver hit the iteration cap (residual {residual:.3e})")]
    SolverIterationCap { residual: f64 },

    #[error("operation requires Schmidt rank 1, state has rank {0}")]
    RankNotOne(usize),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
