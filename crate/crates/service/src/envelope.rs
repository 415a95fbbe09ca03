use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use mt_core::protocol::ProtocolError;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Error,
}

/// Every response body. `error_code` is set exactly when `status` is `error`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiEnvelope<T> {
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub payload: Option<T>,
}

impl<T> ApiEnvelope<T> {
    pub fn ok(payload: T) -> Self {
        ApiEnvelope {
            status: Status::Ok,
            error_code: None,
            message: None,
            payload: Some(payload),
        }
    }
}

impl<T: Serialize> IntoResponse for ApiEnvelope<T> {
    fn into_response(self) -> Response {
        Json(self).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn unknown_auction(id: u64) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "AuctionNotFound", format!("no auction with id {id}"))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl From<ProtocolError> for ApiError {
    fn from(err: ProtocolError) -> Self {
        use ProtocolError::*;
        let status = match &err {
            WrongPhase { .. } | NotYetOpen | WindowClosed | DuplicateIdentity(_) | DuplicateBid(_) | DeadlinePassed { .. } | ClockRewind { .. } => {
                StatusCode::CONFLICT
            }
            UnverifiedIdentity(_) | DisclosureDisabled => StatusCode::FORBIDDEN,
            NothingDue(_) => StatusCode::NOT_FOUND,
            InvalidUnits | BelowFloor { .. } | InsufficientCollateral { .. } | PaymentMismatch { .. } | InvalidParams(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            Ledger(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, err.code(), err.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ApiEnvelope::<()> {
            status: Status::Error,
            error_code: Some(self.code),
            message: Some(self.message),
            payload: None,
        };
        (self.status, Json(body)).into_response()
    }
}
