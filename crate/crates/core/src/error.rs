use thiserror::Error;

/// Errors raised by the modelling, detection and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("time-packing parameter tau = {0} outside (0, 1]")]
    InvalidTau(f64),

    #[error("roll-off factor beta = {0} outside [0, 1]")]
    InvalidBeta(f64),

    #[error("block length must be at least 1")]
    EmptyBlock,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("noise variance must be positive, got {0}")]
    InvalidNoiseVariance(f64),

    #[error("sweep count must be at least 1")]
    InvalidSweepCount,

    #[error("confidence radius epsilon = {0} outside [0, 0.5)")]
    InvalidEpsilon(f64),

    #[error("observation contains non-finite values")]
    NonFiniteObservation,

    #[error("index {index} out of range for block length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("symbol {0} is in the conditioning set")]
    ConditionedSymbol(usize),

    #[error("block length {len} exceeds exhaustive search cap {cap}")]
    BlockTooLong { len: usize, cap: usize },

    #[error(
        "tap spectrum dips to {min_spectrum:.3e} (tolerance {tolerance:.0e}); \
         increase max_half_span or use a loaded factorization"
    )]
    NegativeSpectrum { min_spectrum: f64, tolerance: f64 },

    #[error("spectral factorization residual {residual:.3e} exceeds {bound:.0e}")]
    FactorizationResidual { residual: f64, bound: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("wrong matrix domain: {0}")]
    WrongDomain(&'static str),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
