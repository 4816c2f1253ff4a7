use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};

use musicaog::graph::Subject;
use musicaog::Error;

/// Error response: status plus a `{code, message, detail}` body.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub detail: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            detail: Value::Null,
        }
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn conflict(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, code, message)
    }

    pub fn unprocessable(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    pub fn internal(e: impl ToString) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }

    pub(crate) fn from_rejection(r: JsonRejection) -> Self {
        Self::bad_request("bad_request", r.body_text())
    }

    /// A document that does not load; validation failures list every violation.
    pub(crate) fn bad_document(e: Error) -> Self {
        let detail = match &e {
            Error::Validation(report) => Value::Array(
                report
                    .violations
                    .iter()
                    .map(|v| json!({ "rule": v.rule.as_str(), "subject": subject(&v.subject), "detail": v.detail }))
                    .collect(),
            ),
            Error::Parse { line, column, reason } => json!({ "line": line, "column": column, "reason": reason }),
            _ => Value::Null,
        };
        let code = match e {
            Error::Validation(_) => "validation_error",
            Error::SchemaVersion { .. } => "schema_version",
            _ => "parse_error",
        };
        ApiError {
            detail,
            ..Self::bad_request(code, e.to_string())
        }
    }
}

fn subject(s: &Subject) -> Value {
    match s {
        Subject::Node(id) => json!({ "node": id }),
        Subject::Edge { index, src, dst } => json!({ "edge": index, "src": src, "dst": dst }),
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "code": self.code, "message": self.message, "detail": self.detail });
        (self.status, Json(body)).into_response()
    }
}
