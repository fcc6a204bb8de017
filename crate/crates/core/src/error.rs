use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index ({i}, {j}, {k}) out of range for dimension {n}")]
    IndexOutOfRange { i: usize, j: usize, k: usize, n: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("rank {rank} exceeds dimension {n}")]
    Rank { rank: usize, n: usize },

    #[error("invalid factor model: {0}")]
    InvalidModel(String),

    #[error("value outside its domain: {0}")]
    Domain(String),

    #[error("undefined scale: {0}")]
    UndefinedScale(&'static str),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("did not converge: {0}")]
    Convergence(String),

    #[error("cannot split {support} samples into {parts} parts")]
    DegenerateSplit { support: usize, parts: usize },

    #[error("triple {0:?} is not part of the observed support")]
    NotInSupport([usize; 3]),

    #[error("duplicate canonical entry {0:?}")]
    DuplicateEntry([usize; 3]),

    #[error("power step produced a zero vector")]
    DegenerateDirection,

    #[error("initialization failed: {0}")]
    InitializationFailed(String),

    #[error("least-squares update for component {0} vanished")]
    DegenerateUpdate(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("exhaustive search is limited to n <= 24 (got n = {0})")]
    Scale(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
