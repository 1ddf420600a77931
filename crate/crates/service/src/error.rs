use std::fmt;

use actgen_core::{ActError, LexiconError, S2epaError};
use actgen_neural::NeuralError;
use actgen_pipeline::PipelineError;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    NotFound,
    SolverError,
    GeneratorError,
    UpstreamUnavailable,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::BadRequest => "bad_request",
            ErrorCode::NotFound => "not_found",
            ErrorCode::SolverError => "solver_error",
            ErrorCode::GeneratorError => "generator_error",
            ErrorCode::UpstreamUnavailable => "upstream_unavailable",
        }
    }

    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::BadRequest => StatusCode::BAD_REQUEST,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::SolverError => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::GeneratorError => StatusCode::INTERNAL_SERVER_ERROR,
            ErrorCode::UpstreamUnavailable => StatusCode::SERVICE_UNAVAILABLE,
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Error body shared by every endpoint and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        let message = message.into();
        Self {
            code,
            message: if message.is_empty() {
                code.as_str().replace('_', " ")
            } else {
                message
            },
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::BadRequest, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::NotFound, message)
    }
}

impl fmt::Display for ApiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)?;
        if let Some(d) = &self.detail {
            write!(f, " ({d})")?;
        }
        Ok(())
    }
}

impl std::error::Error for ApiError {}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

impl From<ActError> for ApiError {
    fn from(e: ActError) -> Self {
        match e {
            ActError::Parse { .. } | ActError::Weights(_) => ApiError::bad_request(e.to_string()),
            _ => ApiError::new(ErrorCode::SolverError, e.to_string()),
        }
    }
}

impl From<LexiconError> for ApiError {
    fn from(e: LexiconError) -> Self {
        match e {
            LexiconError::UnknownLabel { .. } => ApiError::not_found(e.to_string()),
            _ => ApiError::bad_request(e.to_string()),
        }
    }
}

impl From<S2epaError> for ApiError {
    fn from(e: S2epaError) -> Self {
        let code = match e {
            S2epaError::Unavailable(_) | S2epaError::Protocol(_) => ErrorCode::UpstreamUnavailable,
            S2epaError::Input(_) => ErrorCode::BadRequest,
            _ => ErrorCode::GeneratorError,
        };
        ApiError::new(code, e.to_string())
    }
}

impl From<NeuralError> for ApiError {
    fn from(e: NeuralError) -> Self {
        match e {
            NeuralError::Io(ref io) if io.kind() == std::io::ErrorKind::NotFound => {
                ApiError::not_found(e.to_string())
            }
            NeuralError::Config(_) | NeuralError::Input(_) => ApiError::bad_request(e.to_string()),
            _ => ApiError::new(ErrorCode::GeneratorError, e.to_string()),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Solver(e) => e.into(),
            PipelineError::S2epa(e) => e.into(),
            PipelineError::Generator(e) => ApiError::new(ErrorCode::GeneratorError, e.to_string()),
            PipelineError::Lexicon(e) => e.into(),
            PipelineError::Io { ref source, .. }
                if source.kind() == std::io::ErrorKind::NotFound =>
            {
                ApiError::not_found(e.to_string())
            }
            other => ApiError::bad_request(other.to_string()),
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::NotFound {
            ApiError::not_found(e.to_string())
        } else {
            ApiError::bad_request(e.to_string())
        }
    }
}

impl From<serde_json::Error> for ApiError {
    fn from(e: serde_json::Error) -> Self {
        ApiError::bad_request(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_serialize_snake_case() {
        let e = ApiError::new(ErrorCode::UpstreamUnavailable, "down").with_detail("port 1");
        let json = serde_json::to_value(&e).unwrap();
        assert_eq!(json["code"], "upstream_unavailable");
        assert_eq!(json["detail"], "port 1");
        assert_eq!(e.to_string(), "upstream_unavailable: down (port 1)");
    }

    #[test]
    fn message_is_never_empty() {
        assert_eq!(ApiError::not_found("").message, "not found");
    }

    #[test]
    fn pipeline_errors_map_to_codes() {
        let unknown = LexiconError::UnknownLabel {
            kind: actgen_core::EntryKind::Behavior,
            label: "zorch".into(),
        };
        assert_eq!(
            ApiError::from(PipelineError::from(unknown)).code,
            ErrorCode::NotFound
        );
        let down = S2epaError::Unavailable("refused".into());
        assert_eq!(
            ApiError::from(PipelineError::from(down)).code,
            ErrorCode::UpstreamUnavailable
        );
        let solver = ActError::Solver("singular".into());
        assert_eq!(
            ApiError::from(PipelineError::from(solver)).code,
            ErrorCode::SolverError
        );
        assert_eq!(
            ApiError::from(PipelineError::Input("x".into())).code,
            ErrorCode::BadRequest
        );
    }
}
