//! Error type shared by every module in the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid quantum numbers: {0}")]
    InvalidQuantumNumbers(String),

    #[error("invalid atomic constants: {0}")]
    InvalidConstants(String),

    #[error("level {0} is not part of the active scheme")]
    LevelNotInScheme(String),

    #[error("duration must be non-negative, got {0} ps")]
    NegativeDuration(f64),

    #[error("invalid pulse: {0}")]
    InvalidPulse(String),

    #[error("density matrix is not physical: {0}")]
    InvalidDensityMatrix(String),

    #[error("integrator step size underflow at t = {t} ps (h = {h:.3e} ps)")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("histogram contains no shots")]
    EmptyHistogram,

    #[error("detection model is degenerate: {0}")]
    DegenerateModel(String),

    #[error("not enough data: {0}")]
    NotEnoughData(String),

    #[error("fit is unidentifiable: {0}")]
    Unidentifiable(String),

    #[error("phase unwrap ambiguous at index {index}: residual {residual:.3} rad from seed prediction")]
    AmbiguousUnwrap { index: usize, residual: f64 },

    #[error("non-physical result: {0}")]
    NonPhysical(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
