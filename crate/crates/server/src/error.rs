//! API error bodies and the mapping from module errors to stable codes.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use personnel_core::idcard::CardError;
use personnel_core::imaging::ImageError;
use personnel_core::records::RecordError;
use personnel_core::storage::StorageError;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    #[serde(serialize_with = "status_code")]
    pub http_status: StatusCode,
    pub code: &'static str,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

fn status_code<S: serde::Serializer>(s: &StatusCode, ser: S) -> Result<S::Ok, S::Error> {
    ser.serialize_u16(s.as_u16())
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, detail: impl Into<String>) -> Self {
        Self {
            http_status: status,
            code,
            detail: detail.into(),
            field: None,
        }
    }

    pub fn with_field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }

    pub fn unauthorized(detail: &str) -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "unauthorized", detail)
    }

    pub fn not_found(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", detail)
    }

    pub fn bad_request(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", detail)
    }

    pub fn payload_too_large(limit: usize) -> Self {
        Self::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "payload_too_large",
            format!("body exceeds {limit} bytes"),
        )
    }

    /// Failures whose text must not reach clients.
    pub fn internal(context: &str, err: impl std::fmt::Display) -> Self {
        log::error!("{context}: {err}");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal_error", context.to_owned())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.http_status, Json(self)).into_response()
    }
}

impl From<RecordError> for ApiError {
    fn from(e: RecordError) -> Self {
        match e {
            RecordError::Validation(v) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation_failed", v.to_string())
                    .with_field(v.field)
            }
            RecordError::Duplicate(id) => {
                ApiError::new(StatusCode::CONFLICT, "duplicate", format!("duplicate id {id}"))
            }
            RecordError::BadPage(_) => ApiError::new(StatusCode::BAD_REQUEST, "bad_page", e.to_string()),
            RecordError::Db(err) => ApiError::internal("database error", err),
            other => ApiError::bad_request(other.to_string()),
        }
    }
}

impl From<ImageError> for ApiError {
    fn from(e: ImageError) -> Self {
        let code = match e {
            ImageError::UnsupportedFormat => "unsupported_format",
            ImageError::OutOfBounds { .. } => "crop_out_of_bounds",
            ImageError::BadDimensions { .. } => "bad_dimensions",
            ImageError::Encode(_) => return ApiError::internal("image encoding failed", e),
            ImageError::Empty | ImageError::Corrupt(_) | ImageError::ZeroDimension => "invalid_image",
        };
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, e.to_string())
    }
}

impl From<StorageError> for ApiError {
    fn from(e: StorageError) -> Self {
        match e {
            StorageError::RowNotFound { .. } => ApiError::not_found(e.to_string()),
            StorageError::InvalidImage(img) => img.into(),
            StorageError::Oversize { max, .. } => ApiError::payload_too_large(max),
            StorageError::DanglingPhoto { .. } => {
                log::error!("{e}");
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "dangling_photo", e.to_string())
            }
            StorageError::WrongStrategy => ApiError::new(StatusCode::CONFLICT, "wrong_strategy", e.to_string()),
            StorageError::VacuumBusy => ApiError::new(StatusCode::CONFLICT, "vacuum_busy", e.to_string()),
            StorageError::Db(err) => ApiError::internal("database error", err),
        }
    }
}

impl From<CardError> for ApiError {
    fn from(e: CardError) -> Self {
        match e {
            CardError::Image(img) => img.into(),
            other => ApiError::internal("card rendering failed", other),
        }
    }
}

impl From<r2d2::Error> for ApiError {
    fn from(e: r2d2::Error) -> Self {
        ApiError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "database_unavailable",
            "no database connection available",
        )
        .log(e)
    }
}

impl ApiError {
    fn log(self, err: impl std::fmt::Display) -> Self {
        log::error!("{}: {err}", self.code);
        self
    }
}
