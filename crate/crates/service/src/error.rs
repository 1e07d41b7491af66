use depot3d_core::report::ValidationReport;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone)]
pub enum ServiceError {
    #[error("UNAUTHORIZED: {0}")]
    Unauthorized(String),
    #[error("FORBIDDEN: {0}")]
    Forbidden(String),
    #[error("NOT_FOUND: {0}")]
    NotFound(String),
    #[error("FROZEN: deposit {0} is published and cannot be edited")]
    Frozen(u64),
    #[error("ALREADY_PUBLISHED: deposit {0} is already published")]
    AlreadyPublished(u64),
    #[error("VALIDATION_FAILED: {} error(s)", .0.errors.len())]
    ValidationFailed(ValidationReport),
    #[error("BAD_URL: {0}")]
    BadUrl(String),
    #[error("BAD_CHECKSUM: {0}")]
    BadChecksum(String),
    #[error("BAD_REQUEST: {0}")]
    BadRequest(String),
    #[error("CONFLICT: {0}")]
    Conflict(String),
    #[error("DUPLICATE_ID: {0}")]
    DuplicateId(String),
    #[error("MISSING_BLOB: {0}")]
    MissingBlob(String),
    #[error("IO_FAILURE: {0}")]
    Io(String),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Unauthorized(_) => "UNAUTHORIZED",
            ServiceError::Forbidden(_) => "FORBIDDEN",
            ServiceError::NotFound(_) => "NOT_FOUND",
            ServiceError::Frozen(_) => "FROZEN",
            ServiceError::AlreadyPublished(_) => "ALREADY_PUBLISHED",
            ServiceError::ValidationFailed(_) => "VALIDATION_FAILED",
            ServiceError::BadUrl(_) => "BAD_URL",
            ServiceError::BadChecksum(_) => "BAD_CHECKSUM",
            ServiceError::BadRequest(_) => "BAD_REQUEST",
            ServiceError::Conflict(_) => "CONFLICT",
            ServiceError::DuplicateId(_) => "DUPLICATE_ID",
            ServiceError::MissingBlob(_) => "MISSING_BLOB",
            ServiceError::Io(_) => "IO_FAILURE",
        }
    }

    pub fn http_status(&self) -> u16 {
        match self {
            ServiceError::Unauthorized(_) => 401,
            ServiceError::Forbidden(_) => 403,
            ServiceError::NotFound(_) => 404,
            ServiceError::Frozen(_) | ServiceError::AlreadyPublished(_) | ServiceError::Conflict(_) => 409,
            ServiceError::DuplicateId(_) => 409,
            ServiceError::ValidationFailed(_) => 422,
            ServiceError::BadUrl(_)
            | ServiceError::BadChecksum(_)
            | ServiceError::BadRequest(_)
            | ServiceError::MissingBlob(_) => 400,
            ServiceError::Io(_) => 500,
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            error: ErrorDetail {
                code: self.code(),
                message: self.to_string(),
                report: match self {
                    ServiceError::ValidationFailed(r) => Some(r.clone()),
                    _ => None,
                },
            },
        }
    }
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Io(e.to_string())
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Debug, Serialize)]
pub struct ErrorDetail {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ValidationReport>,
}
