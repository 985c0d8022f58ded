use thiserror::Error;

use crate::sampling::Axis;

/// Errors raised by the simulation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid needs at least 2 points, got {0}")]
    GridTooSmall(usize),

    #[error("expected {expected} amplitudes for the grid, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("state vector has zero norm and cannot be normalized")]
    ZeroNorm,

    #[error("mark index {index} is outside the grid of {n_points} points")]
    MarkOutOfRange { index: usize, n_points: usize },

    #[error("coupling strength {0} rad is outside [0, pi]")]
    ThetaOutOfRange(f64),

    #[error(
        "zero-momentum post-selection is degenerate (magnitude {0:e}); \
         the prepared state has no overlap with the pinhole mode"
    )]
    DegeneratePostSelection(f64),

    #[error("analyzer setting {0} recorded no post-selected counts while other settings did")]
    InsufficientCounts(Axis),

    #[error(
        "count records must hold exactly one {{X, Y, Z}} setting each with equal shot budgets"
    )]
    IncompleteRecords,

    #[error("pinhole half-width {halfwidth} must satisfy 2*halfwidth < N = {n_points}")]
    WindowTooWide { halfwidth: usize, n_points: usize },

    #[error("x1 and x2 both mark grid index {0}; the interference check needs two distinct cells")]
    IdenticalMarks(usize),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
