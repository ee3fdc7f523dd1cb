use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("box must satisfy lo < hi on every axis (axis {axis}: lo={lo}, hi={hi})")]
    EmptyBox { axis: usize, lo: f64, hi: f64 },
    #[error("shell cubes are not concentric")]
    NotConcentric,
    #[error("closure of the inner cube is not strictly inside the outer cube")]
    NotNested,
    #[error("shell boundary is not a cube (unequal side lengths)")]
    NotCube,

    #[error("diameter band is empty: lo={lo} >= hi={hi}")]
    EmptyBand { lo: f64, hi: f64 },
    #[error("intensity measure is unbounded for a diameter band reaching 0")]
    UnboundedMeasure,
    #[error("sampling requires a positive resolution cutoff (dia_min > 0)")]
    ResolutionZero,
    #[error("target intensity {target} exceeds source intensity {source_lambda}")]
    BadIntensity { target: f64, source_lambda: f64 },
    #[error("invalid soup spec: {0}")]
    InvalidSoupSpec(String),

    #[error("cell side {h} is coarser than dia_min/4 = {limit}")]
    ResolutionTooCoarse { h: f64, limit: f64 },
    #[error("shell is not contained in the grid window")]
    ShellOutsideGrid,
    #[error("box is not contained in the grid window")]
    BoxOutsideGrid,
    #[error("axis {axis} out of range for dimension {dim}")]
    BadAxis { axis: usize, dim: usize },
    #[error("operation is only defined in dimension 2, got {0}")]
    DimensionNot2(usize),

    #[error("invalid fractal spec: {0}")]
    InvalidFractalSpec(String),
    #[error("enumeration needs 2^{bits} configurations, limit is 2^24")]
    TooLarge { bits: u32 },

    #[error("soup window does not cover the translated shells")]
    WindowTooSmall,
    #[error("invalid renormalization spec: {0}")]
    InvalidRenormSpec(String),
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("unsupported event for this model: {0}")]
    UnsupportedEvent(String),
    #[error("invalid estimation parameters: {0}")]
    InvalidEstimate(String),
    #[error("coupled evaluations are not monotone: {0}")]
    NonMonotoneEvidence(String),

    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
