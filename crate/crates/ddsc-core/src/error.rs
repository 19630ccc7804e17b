//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong while building datasets, training or
/// evaluating models.
#[derive(Debug, Error)]
pub enum DdscError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error(
        "aggregate differs from component sum by {delta} at ({row}, {col}), tolerance {tol}"
    )]
    AggregateInconsistent {
        row: usize,
        col: usize,
        delta: f64,
        tol: f64,
    },

    #[error("non-finite value at ({row}, {col})")]
    NonFiniteInput { row: usize, col: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("dictionary column {column} has norm {norm}, above the unit bound")]
    ColumnNormExceeded { column: usize, norm: f64 },

    #[error("input window length {actual} does not match model window length {expected}")]
    WindowLengthMismatch { expected: usize, actual: usize },

    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("truth total is zero over the window; relative total-energy error is undefined")]
    ZeroTruthTotal,

    #[error("truth signal has zero energy over the window; normalized error is undefined")]
    ZeroTruthEnergy,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("instance too large for the brute-force oracle: {0}")]
    DimensionTooLarge(String),

    #[error("energy unit undeclared or unrecognized for house {0}")]
    UnitUndeclared(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("need at least two houses and a non-empty train and test side, got {0} usable")]
    InsufficientHouses(usize),

    #[error("no complete weeks available for the {0} split")]
    NoCompleteWeeks(String),

    #[error("timestamps must be strictly increasing (violated at index {0})")]
    TimestampsNotIncreasing(usize),

    #[error("channel {channel} of house {house} is neither mapped to a category nor ignored")]
    UnmappedChannel { house: String, channel: String },

    #[error("bad file format: {0}")]
    BadFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, DdscError>;
