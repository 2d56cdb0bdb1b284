//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by geometry, samplers and the adaptation controller.
#[derive(Debug, Error)]
pub enum StereoError {
    /// A sphere-to-plane map was evaluated too close to the North pole,
    /// the image of infinity under the stereographic projection.
    #[error("stereographic singularity: latitude {latitude} is within {guard} of the North pole")]
    PoleSingularity { latitude: f64, guard: f64 },

    /// A vector failed the unit-sphere invariant.
    #[error("not a unit vector: |norm - 1| = {deviation}")]
    NotUnit { deviation: f64 },

    /// A matrix failed symmetry or positive-definiteness checks.
    #[error("invalid scale matrix: {0}")]
    InvalidScale(String),

    /// Dimension mismatch between interacting objects.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The target cannot supply a gradient but one was requested.
    #[error("target does not provide a log-density gradient")]
    GradientUnavailable,

    /// The tangent gradient vanished where a bounce reflection was requested.
    #[error("reflection undefined: tangent gradient norm {norm} below {floor}")]
    ZeroGradient { norm: f64, floor: f64 },

    /// The shrinkage loop exceeded its iteration cap.
    #[error(
        "shrinkage did not terminate after {iterations} iterations \
         (level {level}, interval [{theta_min}, {theta_max}])"
    )]
    ShrinkageStuck {
        iterations: u64,
        level: f64,
        theta_min: f64,
        theta_max: f64,
    },

    /// A finite-state kernel admits no entrywise minorisation.
    #[error("kernel is not uniformly minorisable: every column of P^T has a zero entry")]
    NotMinorisable,

    /// Invalid configuration value.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A run produced a non-finite quantity it could not recover from.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, StereoError>;
