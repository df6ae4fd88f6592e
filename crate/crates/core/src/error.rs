use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NonSymmetric { asymmetry: f64 },

    #[error("gram matrix is singular or not positive definite (eigenvalue {eigenvalue:e} <= threshold {threshold:e})")]
    SingularGram { eigenvalue: f64, threshold: f64 },

    #[error("rank {rank} out of range 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },

    #[error("attention row {row} has a degenerate normalizer ({normalizer:e})")]
    DegenerateRow { row: usize, normalizer: f64 },

    #[error("lagged series has (near) zero energy ({energy:e})")]
    DegenerateLag { energy: f64 },

    #[error("masked attention weights sum to {sum:e} at t = {t}")]
    DegenerateMask { t: usize, sum: f64 },

    #[error("signal variance {variance:e} is too small to calibrate noise")]
    DegenerateSignal { variance: f64 },

    #[error("target variance {variance:e} is too small for R²")]
    DegenerateTarget { variance: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("objective or gradient is not finite at the starting point")]
    NonFiniteObjective,

    #[error("line search failed on the first iteration")]
    LineSearchFailure,

    #[error("optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}
