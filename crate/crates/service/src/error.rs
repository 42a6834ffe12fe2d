use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use casebrief_core::classifier::ClassifierError;
use casebrief_core::corpus::CorpusError;
use casebrief_core::evalharness::EvalError;
use casebrief_core::session::SessionError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::store::StoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorCode {
    NotFound,
    Validation,
    LevelGate,
    Conflict,
    BackendUnavailable,
    /// Storage failures outside the caller's control.
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::Validation => StatusCode::BAD_REQUEST,
            ErrorCode::LevelGate => StatusCode::FORBIDDEN,
            ErrorCode::Conflict => StatusCode::CONFLICT,
            ErrorCode::BackendUnavailable => StatusCode::SERVICE_UNAVAILABLE,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), details: Value::Null }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Validation, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::NotFound, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.code.status();
        (status, Json(json!({ "error": self }))).into_response()
    }
}

impl From<ClassifierError> for ApiError {
    fn from(e: ClassifierError) -> Self {
        let code = match &e {
            ClassifierError::BackendUnavailable(_) => ErrorCode::BackendUnavailable,
            ClassifierError::EmptyText | ClassifierError::EmptyTrainingSet | ClassifierError::InvalidConfig(_) => {
                ErrorCode::Validation
            }
            ClassifierError::WrongBackend { .. } => ErrorCode::Conflict,
            ClassifierError::Artifact(_) => ErrorCode::Internal,
        };
        Self::new(code, e.to_string())
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        match e {
            SessionError::LevelGateViolation { operation, level } => Self::new(ErrorCode::LevelGate, message)
                .with_details(json!({ "operation": operation, "level": level })),
            SessionError::InvalidLevel(_)
            | SessionError::SpanOutOfBounds { .. }
            | SessionError::EmptySelection { .. }
            | SessionError::InvalidWorkedExample(_)
            | SessionError::InvalidGatingTable(_) => Self::validation(message),
            SessionError::UnknownDocument(_)
            | SessionError::NoWorkedExample(_)
            | SessionError::UnknownElement(_)
            | SessionError::UnknownAnnotation(_) => Self::not_found(message),
            SessionError::AlreadyResolved(_) | SessionError::NotASuggestion(_) | SessionError::EmptyBrief => {
                Self::new(ErrorCode::Conflict, message)
            }
            SessionError::Classifier(c) => c.into(),
        }
    }
}

impl From<CorpusError> for ApiError {
    fn from(e: CorpusError) -> Self {
        let code = match &e {
            CorpusError::DuplicateDocId(_) => ErrorCode::Conflict,
            CorpusError::Io(_) => ErrorCode::Internal,
            _ => ErrorCode::Validation,
        };
        Self::new(code, e.to_string())
    }
}

impl From<EvalError> for ApiError {
    fn from(e: EvalError) -> Self {
        let message = e.to_string();
        match e {
            EvalError::EmptyTestSet | EvalError::NoThresholds | EvalError::InvalidThreshold(_) => Self::validation(message),
            EvalError::FingerprintMismatch(..) => Self::new(ErrorCode::Conflict, message),
            EvalError::NonMonotone => Self::new(ErrorCode::Internal, message),
            EvalError::Classifier(c) => c.into(),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::InvalidId(_) => Self::validation(message),
            StoreError::NotFound { .. } => Self::not_found(message),
            StoreError::AlreadyExists { .. } => Self::new(ErrorCode::Conflict, message),
            StoreError::Corrupt { .. } | StoreError::Io { .. } => Self::new(ErrorCode::Internal, message),
            StoreError::Model(c) => c.into(),
        }
    }
}
