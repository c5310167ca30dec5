use thiserror::Error;

use crate::lattice::MomentumMode;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 1")]
    ZeroDimension,

    #[error("mode {mode} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        mode: MomentumMode,
        expected: usize,
        got: usize,
    },

    #[error("Fourier coefficient at {0} is negative or not finite")]
    InvalidCoefficient(MomentumMode),

    #[error("duplicate Fourier coefficient for mode {0}")]
    DuplicateMode(MomentumMode),

    #[error("coefficient table is not symmetric: v({0}) != v(-{0})")]
    AsymmetricTable(MomentumMode),

    #[error("sampled potential is negative ({value}) at x = {x:?}")]
    NegativePotential { x: Vec<f64>, value: f64 },

    #[error("the zero mode has no excitation energy")]
    ZeroMode,

    #[error("mode {0} is not part of the mode set")]
    ModeNotInSet(MomentumMode),

    #[error("zero mode is required but missing from the mode set")]
    MissingZeroMode,

    #[error("particle number must be at least 2, got {0}")]
    TooFewParticles(usize),

    #[error("basis size exceeds the guard of {guard} states")]
    BasisTooLarge { guard: usize },

    #[error("vector length {got} does not match dimension {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("vector is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("assembly referenced a state outside the momentum sector")]
    OutOfSector,

    #[error("requested {requested} eigenpairs of a {dim}-dimensional matrix")]
    TooManyEigenpairs { requested: usize, dim: usize },

    #[error("invalid solver setting: {0}")]
    InvalidSetting(String),

    #[error("eigensolver did not converge after {iterations} iterations (worst residual {worst_residual:e})")]
    NotConverged {
        iterations: usize,
        worst_residual: f64,
        residuals: Vec<f64>,
    },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
