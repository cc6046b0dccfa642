//! Serving errors and their HTTP mapping.

use livelab_core::model::{ContextId, DocId, EventId, ImpressionId, ModelError, SessionId};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    /// The production baseline cannot answer; nothing can be served.
    #[error("baseline system unavailable: {0}")]
    NoBaseline(String),
    #[error("no candidate list or query registered for {0}")]
    UnknownContext(ContextId),
    #[error("unknown impression {0}")]
    UnknownImpression(ImpressionId),
    #[error("document {0} is not part of impression {1}")]
    UnknownClickedDoc(DocId, ImpressionId),
    #[error("event {0} is invalid: {1}")]
    InvalidEvent(EventId, String),
    #[error("session {0}: event timestamps decrease")]
    NonMonotonicSession(SessionId),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("log append failed: {0}")]
    Log(String),
}

impl AppError {
    /// Status class for the HTTP layer: 4xx for caller mistakes, 503 for
    /// baseline loss, 500 for local faults.
    pub fn status_code(&self) -> u16 {
        match self {
            AppError::NoBaseline(_) => 503,
            AppError::UnknownContext(_) | AppError::UnknownImpression(_) => 404,
            AppError::UnknownClickedDoc(..)
            | AppError::InvalidEvent(..)
            | AppError::NonMonotonicSession(_)
            | AppError::BadRequest(_) => 400,
            AppError::Log(_) => 500,
        }
    }
}

impl From<ModelError> for AppError {
    fn from(err: ModelError) -> Self {
        AppError::BadRequest(err.to_string())
    }
}
