//! Crate-wide error type, grouped by what the caller can do about each
//! failure: fix the input, retry the transport, or fall back.

use crate::llm::LlmError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("search space: {0}")]
    Space(String),
    #[error("config: {0}")]
    Config(String),
    #[error("trajectory: {0}")]
    Trajectory(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("prompt: {0}")]
    Prompt(String),
    #[error("data integrity: {0}")]
    DataIntegrity(String),
    #[error("surrogate: {0}")]
    Surrogate(String),
    #[error("sampler: {0}")]
    Sampler(String),
    #[error("numeric: {0}")]
    Numeric(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exit-code class for the CLI: invalid input 2, transport 3, other 1.
    /// A missing credential counts as invalid input because it is caught
    /// before any network call.
    pub fn exit_class(&self) -> u8 {
        match self {
            Error::Space(_)
            | Error::Config(_)
            | Error::Trajectory(_)
            | Error::Prompt(_)
            | Error::DataIntegrity(_)
            | Error::InsufficientData(_)
            | Error::Json(_) => 2,
            Error::Llm(LlmError::MissingCredential(_)) => 2,
            Error::Llm(LlmError::InvalidRequest(_)) => 2,
            Error::Llm(_) => 3,
            _ => 1,
        }
    }
}
