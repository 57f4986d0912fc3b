use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use textprof_core::wrangle::WrangleError;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }

    pub fn not_found(what: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown {what}"))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    pub fn busy() -> Self {
        Self::new(StatusCode::CONFLICT, "another mutation of this dataset is in progress")
    }

    pub fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl From<WrangleError> for ApiError {
    fn from(e: WrangleError) -> Self {
        match e {
            WrangleError::UnknownVersion(_) => Self::new(StatusCode::NOT_FOUND, e.to_string()),
            _ => Self::bad_request(e.to_string()),
        }
    }
}

impl From<textprof_core::Error> for ApiError {
    fn from(e: textprof_core::Error) -> Self {
        match e {
            textprof_core::Error::Ingest(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
            textprof_core::Error::Wrangle(w) => w.into(),
            _ => Self::internal(e),
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        Self::internal(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let kind = match self.status {
            StatusCode::BAD_REQUEST => "InvalidOp",
            StatusCode::NOT_FOUND => "NotFound",
            StatusCode::CONFLICT => "Conflict",
            StatusCode::UNPROCESSABLE_ENTITY => "ProviderFailure",
            _ => "Internal",
        };
        (self.status, Json(json!({"error": kind, "detail": self.message}))).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
