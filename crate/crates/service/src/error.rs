use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use viewclean::engine::SessionSummary;

use crate::api::ErrorBody;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),

    #[error("session has stopped")]
    Stopped(SessionSummary),

    #[error(transparent)]
    Engine(#[from] viewclean::Error),

    #[error("malformed request: {0}")]
    BadRequest(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        use viewclean::Error as E;
        match self {
            ApiError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ApiError::Stopped(_) => StatusCode::CONFLICT,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
            ApiError::Engine(e) => match e {
                E::NotFound { .. } => StatusCode::NOT_FOUND,
                E::Submission(_) => StatusCode::UNPROCESSABLE_ENTITY,
                E::Stopped(_) => StatusCode::CONFLICT,
                E::MissingData { .. } => StatusCode::SERVICE_UNAVAILABLE,
                E::Config(_) | E::UnknownColumn(_) | E::Type(_) | E::UnknownFunction(_) => {
                    StatusCode::BAD_REQUEST
                }
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::error!("{self}");
        }
        let summary = match &self {
            ApiError::Stopped(s) => Some(s.clone()),
            _ => None,
        };
        let body = ErrorBody {
            error: self.to_string(),
            summary,
        };
        (status, Json(body)).into_response()
    }
}
