use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cube {0} is outside the mesh range")]
    CubeOutOfRange(String),

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("degenerate measure: mu(Q) = 0 on cube {0}")]
    DegenerateMeasure(String),

    #[error("negative power of a zero value in cell {cell}")]
    Singularity { cell: usize },

    #[error("power weight x^{exponent} is not locally integrable at the origin")]
    NonIntegrable { exponent: f64 },

    #[error("cubes belong to different grids")]
    MixedGrids,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("covering lemma falsified: no shifted dyadic cube covers {0}")]
    NoCover(String),

    #[error("tower depth {depth} is insufficient for delta = {delta}: witness norm moved by {change:.3e} relative between depth {depth} and {}", depth + 8)]
    DepthInsufficient { depth: usize, delta: f64, change: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
