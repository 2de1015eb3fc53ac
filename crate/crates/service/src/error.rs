use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use dosefind_core::Error as CoreError;
use serde::Serialize;

/// One offending input field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("{message}")]
    InvalidConfig {
        message: String,
        errors: Vec<FieldError>,
    },
    #[error("{0}")]
    InvalidOutcome(String),
    #[error("{0}")]
    UnknownDesign(String),
    #[error("trial {0} not found")]
    TrialNotFound(String),
    #[error("simulation {0} not found")]
    SimulationNotFound(String),
    #[error("trial {id} is {status}; no further cohorts are accepted")]
    SessionClosed { id: String, status: &'static str },
    #[error("trial {0} is still active; finalize with operator_override to close it")]
    SessionActive(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("storage failure: {0}")]
    Storage(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ApiError::InvalidConfig { .. } => "invalid_config",
            ApiError::InvalidOutcome(_) => "invalid_outcome",
            ApiError::UnknownDesign(_) => "unknown_design",
            ApiError::TrialNotFound(_) => "trial_not_found",
            ApiError::SimulationNotFound(_) => "simulation_not_found",
            ApiError::SessionClosed { .. } => "session_closed",
            ApiError::SessionActive(_) => "session_active",
            ApiError::BadRequest(_) => "bad_request",
            ApiError::Storage(_) => "storage_error",
            ApiError::Internal(_) => "internal_error",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::InvalidConfig { .. } | ApiError::InvalidOutcome(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ApiError::UnknownDesign(_)
            | ApiError::TrialNotFound(_)
            | ApiError::SimulationNotFound(_) => StatusCode::NOT_FOUND,
            ApiError::SessionClosed { .. } | ApiError::SessionActive(_) => StatusCode::CONFLICT,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Storage(_) | ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn title(&self) -> &'static str {
        match self {
            ApiError::InvalidConfig { .. } => "Invalid configuration",
            ApiError::InvalidOutcome(_) => "Invalid cohort outcome",
            ApiError::UnknownDesign(_) => "Unknown design",
            ApiError::TrialNotFound(_) => "Trial not found",
            ApiError::SimulationNotFound(_) => "Simulation not found",
            ApiError::SessionClosed { .. } => "Trial closed",
            ApiError::SessionActive(_) => "Trial still active",
            ApiError::BadRequest(_) => "Bad request",
            ApiError::Storage(_) => "Storage failure",
            ApiError::Internal(_) => "Internal error",
        }
    }

    /// Maps a core error raised while validating a configuration.
    pub fn config(err: CoreError) -> Self {
        let field = match &err {
            CoreError::UnknownDesign { .. } => return ApiError::UnknownDesign(err.to_string()),
            CoreError::InvalidParameter { field, .. } => field.to_string(),
            CoreError::InvalidInterval(_) => "eps".into(),
            CoreError::InvalidDose { .. } => "n_doses".into(),
            CoreError::LengthMismatch { .. } => "n_doses".into(),
            CoreError::NoDefaultSkeleton(_) => "options.crm_skeleton".into(),
            _ => "design".into(),
        };
        let message = err.to_string();
        ApiError::InvalidConfig {
            errors: vec![FieldError {
                field,
                message: message.clone(),
            }],
            message,
        }
    }
}

#[derive(Serialize)]
struct Problem<'a> {
    #[serde(rename = "type")]
    kind: String,
    title: &'a str,
    status: u16,
    detail: String,
    code: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    errors: Option<&'a [FieldError]>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::error!(code = self.code(), "{self}");
        }
        let body = Problem {
            kind: format!("urn:dosefind:problem:{}", self.code()),
            title: self.title(),
            status: status.as_u16(),
            detail: self.to_string(),
            code: self.code(),
            errors: match &self {
                ApiError::InvalidConfig { errors, .. } => Some(errors),
                _ => None,
            },
        };
        let json = serde_json::to_vec(&body).unwrap_or_default();
        (
            status,
            [(header::CONTENT_TYPE, "application/problem+json")],
            json,
        )
            .into_response()
    }
}
