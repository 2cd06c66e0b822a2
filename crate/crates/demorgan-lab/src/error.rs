use thiserror::Error;

use crate::formula::ParseError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("malformed input: {0}")]
    Input(String),
    #[error("no value bound for atom `{0}`")]
    MissingAtom(String),
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("size guard exceeded: {0}")]
    Guard(String),
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
