use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("too many features: d = {d}, at most {max} are supported")]
    TooManyFeatures { d: usize, max: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("shape mismatch: expected {expected} entries, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),

    #[error("feature index {index} out of range for d = {d}")]
    FeatureOutOfRange { index: usize, d: usize },

    #[error("cell {cell} out of range for a grid with {cells} cells")]
    CellOutOfRange { cell: usize, cells: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("value {value} in column {column} (row {row}) is not a grid value")]
    OffGrid { row: usize, column: usize, value: f64 },

    #[error("distribution is not a product of its marginals (max deviation {deviation:e})")]
    NotProduct { deviation: f64 },

    #[error("function value {value} at cell {cell} is outside [0, 1]")]
    RangeViolation { cell: usize, value: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("eigensolver did not converge on a {0}x{0} matrix")]
    EigenNonConvergence(usize),

    #[error("subspace dimension {dim} exceeds cap {cap} at derived level {level}")]
    DimensionBlowUp { level: usize, dim: usize, cap: usize },

    #[error("operator too large: {size} basis cells, limit is {limit}")]
    OperatorTooLarge { size: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("simplex iteration cap {cap} exceeded; basis = {basis:?}")]
    IterationCap { cap: usize, basis: Vec<usize> },

    #[error("kernel decomposition does not reproduce the limit object (max error {max_error:e} > {tol:e})")]
    ReconstructionMismatch { max_error: f64, tol: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
