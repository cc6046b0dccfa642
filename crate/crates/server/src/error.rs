//! Server-side errors and their HTTP mapping.

use livelab_core::model::SystemId;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("missing or unknown bearer token")]
    Unauthorized,
    #[error("{0} belongs to another participant")]
    NotOwner(SystemId),
    #[error("unknown system {0}")]
    UnknownSystem(SystemId),
    #[error("system {0} is already registered")]
    DuplicateSystem(SystemId),
    #[error("system {0}: {1} does not move the lifecycle forward")]
    BadTransition(SystemId, String),
    #[error("system {0} has no uploaded run")]
    NoRun(SystemId),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("storage: {0}")]
    Storage(String),
}

impl ServerError {
    pub fn status_code(&self) -> u16 {
        match self {
            ServerError::Unauthorized => 401,
            ServerError::NotOwner(_) => 403,
            ServerError::UnknownSystem(_) | ServerError::NoRun(_) => 404,
            ServerError::DuplicateSystem(_) | ServerError::BadTransition(..) => 409,
            ServerError::BadRequest(_) => 400,
            ServerError::Storage(_) => 500,
        }
    }
}
