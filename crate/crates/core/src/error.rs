use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sets live on different lattices")]
    LatticeMismatch,

    #[error("operation requires a nonempty set")]
    EmptySet,

    #[error("operation requires a set with nonempty complement in the window")]
    FullSet,

    #[error("cell {0:?} lies outside the window")]
    OutOfWindow([i64; 3]),

    #[error("point {0:?} lies outside the domain of the sampled potential")]
    OutOfDomain(Vec<f64>),

    #[error("cell {0:?} is not a boundary cell of the set")]
    NotBoundary([i64; 3]),

    #[error("sets are not disjoint")]
    NotDisjoint,

    #[error("volume {volume} is not an integer number of cells of volume {cell_volume}")]
    FractionalVolume { volume: f64, cell_volume: f64 },

    #[error("target volume {volume} exceeds the window volume {window}")]
    InfeasibleVolume { volume: f64, window: f64 },

    #[error("enumeration guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
