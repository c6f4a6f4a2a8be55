use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use marginalia_core::Error;
use serde::{Deserialize, Serialize};

/// Body of every error response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn unauthorized(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "Unauthorized", message)
    }

    pub fn forbidden(message: impl Into<String>) -> Self {
        Self::new(StatusCode::FORBIDDEN, "Forbidden", message)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "ValidationFailed", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

/// HTTP status for each core error.
pub fn status_of(e: &Error) -> StatusCode {
    match e {
        Error::Unauthorized(_) => StatusCode::UNAUTHORIZED,
        Error::UnknownUser(_)
        | Error::UnknownDocument(_)
        | Error::UnknownSession(_)
        | Error::UnknownPeer(_)
        | Error::UnknownGroup(_)
        | Error::UnknownRef(_) => StatusCode::NOT_FOUND,
        Error::DuplicateRef(_)
        | Error::DuplicateIdentity(_)
        | Error::DuplicatePeer(_)
        | Error::SessionAlreadyOpen { .. } => StatusCode::CONFLICT,
        Error::Model(_)
        | Error::Search(_)
        | Error::ValidationFailed(_)
        | Error::SessionClosed(_)
        | Error::NonMonotonicTime { .. }
        | Error::TimeBeforeOpen { .. } => StatusCode::BAD_REQUEST,
        Error::TransportFailure(_) => StatusCode::BAD_GATEWAY,
        Error::CorruptEntry { .. } | Error::SequenceGap { .. } | Error::Io(_) => {
            StatusCode::INTERNAL_SERVER_ERROR
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError {
            status: status_of(&e),
            code: e.code(),
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = self.code, message = %self.message, "request failed");
        }
        let body = ErrorBody {
            code: self.code.to_string(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
