use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("generation {generation}: {source}")]
    AtGeneration {
        generation: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parameter mismatch: {0}")]
    ParameterMismatch(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("unknown token {token:?} at position {position}")]
    UnknownToken { token: String, position: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
