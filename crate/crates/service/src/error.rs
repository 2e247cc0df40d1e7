use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ServiceError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown world {0}")]
    UnknownWorld(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("degenerate selection: {0}")]
    Degenerate(String),
    #[error("{what} of {got} px exceeds the budget of {limit} px")]
    TooLarge { what: &'static str, got: u64, limit: u64 },
    #[error("idempotency key {0} was used for a different request")]
    KeyReuse(String),
    #[error("a world build is already running in this session")]
    Busy,
    #[error("world {0} is not ready")]
    NotReady(String),
    #[error("{stage} failed: {cause}")]
    Stage { stage: &'static str, cause: String },
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            Self::UnknownSession(_) | Self::UnknownWorld(_) => StatusCode::NOT_FOUND,
            Self::BadRequest(_) => StatusCode::BAD_REQUEST,
            Self::Degenerate(_) | Self::Stage { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            Self::TooLarge { .. } => StatusCode::PAYLOAD_TOO_LARGE,
            Self::KeyReuse(_) | Self::Busy | Self::NotReady(_) => StatusCode::CONFLICT,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.to_string() });
        (self.status(), Json(body)).into_response()
    }
}
