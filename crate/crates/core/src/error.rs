use thiserror::Error;

/// Errors raised by the construction and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("distance matrix is not symmetric at ({0}, {1})")]
    NonSymmetricMetric(usize, usize),
    #[error("distance between distinct points {0} and {1} is zero")]
    ZeroOffDiagonal(usize, usize),
    #[error("distance at ({0}, {1}) is negative or not finite")]
    InvalidDistance(usize, usize),
    #[error("weight of point {0} must be strictly positive and finite")]
    InvalidWeight(usize),
    #[error("space must contain at least one point")]
    EmptySpace,
    #[error("expected {expected} entries, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("point id {0} is out of range")]
    InvalidPoint(usize),
    #[error("radius grid is degenerate: every ball is a singleton")]
    DegenerateGrid,
    #[error("radius {radius} is below the minimum positive distance {floor}")]
    DegenerateRadius { radius: f64, floor: f64 },
    #[error("invalid radius {0}")]
    InvalidRadius(f64),
    #[error("delta must lie in (0, 1), got {0}")]
    InvalidDelta(f64),
    #[error("k_min must be <= 0, got {0}")]
    InvalidLevelRange(i32),
    #[error("net hierarchy was built on a different space")]
    NetMismatch,
    #[error("cube has no children")]
    EmptyChild,
    #[error("signal belongs to a space with {found} points, basis has {expected}")]
    SpaceMismatch { expected: usize, found: usize },
    #[error("coefficient vector incomplete: expected {expected} entries, found {found}")]
    IncompleteCoefficients { expected: usize, found: usize },
    #[error("level {0} is outside the wavelet range")]
    LevelOutOfRange(i32),
    #[error("exponent p must be positive, got {0}")]
    InvalidP(f64),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("exact enumeration limited to {limit} product points, got {found}")]
    TooLargeForExact { limit: usize, found: usize },
    #[error("rectangle sequence shape {found:?} does not match frame {expected:?}")]
    UnknownRectangle {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("alpha must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("exponents must satisfy 0 < p2 < p < p1, got p={p}, p1={p1}, p2={p2}")]
    InvalidExponents { p: f64, p1: f64, p2: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

pub type Result<T> = std::result::Result<T, Error>;
