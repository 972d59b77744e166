use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point coincides with antenna {antenna}")]
    CoincidentPoint { antenna: usize },

    #[error("distance {distance} m is below the array height {height} m")]
    BelowArrayHeight { distance: f64, height: f64 },

    #[error("grid is empty")]
    EmptyGrid,

    #[error("dictionary needs at least two atoms, got {0}")]
    DegenerateDictionary(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("channel vector has zero norm")]
    ZeroChannel,

    #[error("target grid size {target} unreachable for {n_curves} level curves (nearest achieved {nearest})")]
    UnreachableTarget {
        target: usize,
        n_curves: usize,
        nearest: usize,
    },

    #[error("no design candidate could reach the target grid size {0}")]
    NoFeasibleDesign(usize),

    #[error("non-finite SINR for user {user}")]
    NonFiniteSinr { user: usize },

    #[error("noise whitening failed: combiner Gram matrix is singular")]
    SingularCombiner,

    #[error("unknown experiment '{0}'")]
    UnknownExperiment(String),

    #[error(
        "manifest in {0} was produced by a different configuration; pass --force to overwrite"
    )]
    ManifestMismatch(String),

    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
