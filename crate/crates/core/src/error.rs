use thiserror::Error;

/// Errors shared by all kernel operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: kernel is {kernel}x{kernel}, space has {space} points")]
    DimensionMismatch { kernel: usize, space: usize },

    #[error("kernel dimensions disagree: {left} vs {right}")]
    KernelDimensionMismatch { left: usize, right: usize },

    #[error("non-finite entry at ({i}, {j}); patch infinities before this operation")]
    NonFiniteEntry { i: usize, j: usize },

    #[error("window {w} does not divide the point count {n}")]
    WindowDoesNotDivide { w: usize, n: usize },

    #[error("window anchored at ({x}, {y}) contains a non-finite entry")]
    NonFiniteWindow { x: usize, y: usize },

    #[error("operation requires circle layout (equal-mass cyclically ordered cells)")]
    RequiresCircleLayout,

    #[error("invalid ladder: {reason}")]
    InvalidLadder { reason: String },

    #[error("point index {index} out of range for {n} points")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("base point {x0} is not a member of the patch set")]
    BasePointOutsidePatchSet { x0: usize },

    #[error("patch set restriction violates the semimetric precondition: {reason}")]
    PatchPreconditionFailed { reason: String },

    #[error("all points with finite base-row values carry zero mass; cannot renormalize")]
    NoFiniteMass,

    #[error("sample count must be positive")]
    EmptySample,

    #[error("sample size must be at least {min}")]
    SampleTooSmall { min: usize },

    #[error("all masses are zero; nothing to sample")]
    AllMassesZero,

    #[error("problem size {n} exceeds the exact-search limit {limit}")]
    SizeLimitExceeded { n: usize, limit: usize },

    #[error("radius ladder must be nonempty")]
    EmptyLadder,

    #[error("radii must be sorted strictly ascending (offending position {position})")]
    RadiiNotSorted { position: usize },

    #[error("parameter {name} must be positive")]
    NonPositiveParameter { name: &'static str },

    #[error("invalid point space: {reason}")]
    InvalidSpace { reason: String },

    #[error("invalid instance spec: {reason}")]
    InvalidInstanceSpec { reason: String },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
