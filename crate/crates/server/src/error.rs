use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use thiserror::Error;

use crowdrate_core::event_store::StoreError;
use crowdrate_core::wire::ErrorBody;
use crowdrate_core::GameError;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    fn parts(&self) -> (StatusCode, &'static str) {
        match self {
            ApiError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            ApiError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            ApiError::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            ApiError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = self.parts();
        if status.is_server_error() {
            tracing::error!("{self}");
        }
        (status, Json(ErrorBody { kind: kind.to_string(), error: self.to_string() })).into_response()
    }
}

impl From<GameError> for ApiError {
    fn from(e: GameError) -> Self {
        let msg = e.to_string();
        match e {
            GameError::UnknownPlayer(_) | GameError::UnknownInstrument(_) => ApiError::NotFound(msg),
            GameError::DuplicateOpenPrediction { .. }
            | GameError::DuplicatePlayer(_)
            | GameError::InstrumentConflict { .. }
            | GameError::Quote(_) => ApiError::Conflict(msg),
            GameError::WrongKind { .. } | GameError::NonPositiveEntry | GameError::Config(_) => {
                ApiError::BadRequest(msg)
            }
            GameError::SequenceGap { .. }
            | GameError::TimestampRegression { .. }
            | GameError::PredictionIdOutOfOrder { .. } => ApiError::Internal(msg),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Apply { source, .. } => source.into(),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::BadRequest(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::BadRequest(e.body_text())
    }
}
