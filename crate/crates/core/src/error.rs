use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("fact is empty after normalization")]
    EmptyFact,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("unknown fact id `{0}`")]
    UnknownFact(String),

    #[error("query is empty after stopword removal")]
    EmptyQuery,

    #[error("retrieval failed: every answer option produced an empty query")]
    RetrievalFailed,

    #[error("degenerate dataset: {0}")]
    DatasetDegenerate(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("input of length {len} exceeds max_len {max_len}")]
    InputTooLong { len: usize, max_len: usize },

    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: usize, vocab_size: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("question `{0}` has no answer key")]
    MissingAnswerKey(String),

    #[error("id mismatch: {0}")]
    IdMismatch(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
