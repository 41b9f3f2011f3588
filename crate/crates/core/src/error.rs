use thiserror::Error;

/// Errors raised by the geometry routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite entry at row {row}, column {col}")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("need at least {min} points, got {found}")]
    TooFewPoints { min: usize, found: usize },
    #[error("ambient dimension must be at least 1")]
    EmptyDimension,
    #[error("shape mismatch: expected {expected} values, got {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("k = {k} must satisfy 1 <= k < n = {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("range {start}..{end} out of bounds for {len} rows")]
    RangeOutOfBounds { start: usize, end: usize, len: usize },
    #[error("degenerate neighborhood at point {point}: zero neighbor distance")]
    DegenerateNeighborhood { point: usize },
    #[error("all distance ratios equal one")]
    AllRatiosUnity,
    #[error("neighborhood of {size} points is too small for {needed}")]
    NeighborhoodTooSmall { size: usize, needed: usize },
    #[error("degenerate tangent space at point {point}")]
    DegenerateTangent { point: usize },
    #[error("tangent basis columns are linearly dependent")]
    RankDeficientBasis,
    #[error("support mismatch at index {index}: p1 vanishes where p0 is positive")]
    SupportMismatch { index: usize },
    #[error("quadratic form vanishes along the perturbation")]
    DegenerateDirection,
    #[error("empty input")]
    EmptyInput,
    #[error("need at least 3 positive points in the fit window, got {found}")]
    InsufficientPositivePoints { found: usize },
    #[error("zero variance")]
    ZeroVariance,
    #[error("bad parameters: {0}")]
    BadParameters(&'static str),
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("no candidate reduces distortion")]
    NoImprovingCandidate,
    #[error("points are antipodal")]
    AntipodalPoints,
    #[error("graph is disconnected ({components} components)")]
    DisconnectedGraph { components: usize },
    #[error("eigensolver did not converge")]
    EigenSolverFailed,
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
