use thiserror::Error;

/// Errors produced by the simulation, localization and tuning routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid array geometry: {0}")]
    InvalidGeometry(String),

    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("duplicate source positions at indices {0} and {1}")]
    DuplicatePositions(usize, usize),

    #[error("noiseless signal is identically zero")]
    ZeroSignal,

    #[error("projection is ill-conditioned (reciprocal condition {0:e})")]
    IllConditioned(f64),

    #[error("weight {0} is not unit-modulus (|w| = {1})")]
    NotUnitModulus(usize, f64),

    #[error("objective was non-finite at every grid point")]
    NonFiniteObjective,

    #[error("{method} tuning is not available for {architecture}")]
    IncompatibleTuning {
        method: &'static str,
        architecture: &'static str,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
