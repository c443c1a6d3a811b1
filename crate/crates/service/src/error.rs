use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

use affect_core::pipeline::SCHEMA_VERSION;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown patient `{0}`")]
    UnknownPatient(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("malformed audio: {0}")]
    MalformedAudio(String),
    #[error("malformed transcript: {0}")]
    MalformedTranscript(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("session `{id}` is {state}")]
    NotReady { id: String, state: String },
    #[error("storage: {0}")]
    Storage(String),
}

impl ServiceError {
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::UnknownPatient(_) | ServiceError::UnknownSession(_) => "not_found",
            ServiceError::MalformedAudio(_) => "malformed_audio",
            ServiceError::MalformedTranscript(_) => "malformed_transcript",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::NotReady { .. } => "not_ready",
            ServiceError::Storage(_) => "storage",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownPatient(_) | ServiceError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ServiceError::MalformedAudio(_) | ServiceError::MalformedTranscript(_) | ServiceError::BadRequest(_) => {
                StatusCode::BAD_REQUEST
            }
            ServiceError::NotReady { .. } => StatusCode::CONFLICT,
            ServiceError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Storage(e.to_string())
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = json!({
            "schema_version": SCHEMA_VERSION,
            "error": { "kind": self.kind(), "message": self.to_string() },
        });
        (self.status(), Json(body)).into_response()
    }
}
