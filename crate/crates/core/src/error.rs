use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: String,
    },

    #[error("duplicate item id `{0}`")]
    DuplicateId(String),

    #[error("rating {value} for item `{item_id}` is outside [1, 5]")]
    RatingOutOfRange { item_id: String, value: f64 },

    #[error("dataset ratings are already normalized")]
    AlreadyNormalized,

    #[error("dataset ratings must be normalized before training")]
    NotNormalized,

    #[error("split leaves the {side} side empty ({total} elements, fraction {fraction})")]
    EmptySplit {
        side: &'static str,
        total: usize,
        fraction: f64,
    },

    #[error("not enough items: {0}")]
    InsufficientItems(String),

    #[error("unknown item `{0}`")]
    UnknownItem(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("correlation undefined: {0} input is constant")]
    UndefinedCorrelation(&'static str),

    #[error("tied vote on question `{0}`")]
    TiedVote(String),

    #[error("degenerate rater matrix: {0}")]
    DegenerateMatrix(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("activation cache is stale (cache generation {cache}, model generation {model})")]
    StaleCache { cache: u64, model: u64 },

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
