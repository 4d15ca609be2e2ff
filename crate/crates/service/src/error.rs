use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;

use guidefill::engine::EngineError;
use guidefill::guide::GuideError;
use guidefill::io::IoError;
use guidefill::pipeline::PipelineError;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown project {0:?}")]
    UnknownProject(String),
    #[error("project {0:?} has no result yet")]
    NoResult(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("storage failure: {0}")]
    Storage(#[from] std::io::Error),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownProject(_) | ServiceError::NoResult(_) => StatusCode::NOT_FOUND,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Storage(_) | ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

impl From<GuideError> for ServiceError {
    fn from(e: GuideError) -> Self {
        match e {
            GuideError::Grid(g) => ServiceError::Conflict(g.to_string()),
            other => ServiceError::BadRequest(other.to_string()),
        }
    }
}

impl From<IoError> for ServiceError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Read { .. } | IoError::Write { .. } | IoError::Encode(_) => ServiceError::Internal(e.to_string()),
            other => ServiceError::BadRequest(other.to_string()),
        }
    }
}

impl From<PipelineError> for ServiceError {
    fn from(e: PipelineError) -> Self {
        if e.is_dimension_mismatch() {
            return ServiceError::Conflict(e.to_string());
        }
        match e {
            PipelineError::Engine(EngineError::InvalidParams(m)) => ServiceError::BadRequest(m),
            PipelineError::Engine(EngineError::EmptyDomain | EngineError::NoReadableData) => ServiceError::Unprocessable(e.to_string()),
            PipelineError::Guide(g) => g.into(),
            other => ServiceError::Internal(other.to_string()),
        }
    }
}
