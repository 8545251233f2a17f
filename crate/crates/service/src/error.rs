use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("no questions for task `{0}`")]
    EmptyBank(String),
    #[error("invalid question bank: {0}")]
    InvalidBank(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session `{0}` is closed")]
    ClosedSession(String),
    #[error("rater `{rater_id}` already has a {task} session")]
    SessionExists { rater_id: String, task: String },
    #[error("unknown question `{0}`")]
    UnknownQuestion(String),
    #[error("question `{question_id}` is not part of session `{session_id}`")]
    NotInSession { session_id: String, question_id: String },
    #[error("choice {choice} is outside the domain of a {task} question")]
    Domain { choice: i64, task: String },
    #[error("question `{question_id}` was already answered in session `{session_id}`")]
    Duplicate { session_id: String, question_id: String },
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("no responses recorded")]
    EmptyStore,
    #[error("response log line {line}: {message}")]
    CorruptLog { line: usize, message: String },
    #[error("metrics: {0}")]
    Metrics(#[from] capcomp_core::Error),
    #[error("io: {0}")]
    Io(String),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownTask(_) => "unknown_task",
            ServiceError::EmptyBank(_) => "empty_bank",
            ServiceError::InvalidBank(_) => "invalid_bank",
            ServiceError::UnknownSession(_) => "unknown_session",
            ServiceError::ClosedSession(_) => "closed_session",
            ServiceError::SessionExists { .. } => "session_exists",
            ServiceError::UnknownQuestion(_) => "unknown_question",
            ServiceError::NotInSession { .. } => "not_in_session",
            ServiceError::Domain { .. } => "domain",
            ServiceError::Duplicate { .. } => "duplicate",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::EmptyStore => "empty_store",
            ServiceError::CorruptLog { .. } => "corrupt_log",
            ServiceError::Metrics(_) => "metrics",
            ServiceError::Io(_) => "io",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownTask(_) | ServiceError::Domain { .. } | ServiceError::BadRequest(_) => {
                StatusCode::BAD_REQUEST
            }
            ServiceError::UnknownSession(_) | ServiceError::UnknownQuestion(_) | ServiceError::EmptyStore => {
                StatusCode::NOT_FOUND
            }
            ServiceError::ClosedSession(_)
            | ServiceError::SessionExists { .. }
            | ServiceError::NotInSession { .. }
            | ServiceError::Duplicate { .. } => StatusCode::CONFLICT,
            ServiceError::EmptyBank(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    message: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.code(),
            message: self.to_string(),
        };
        (self.status(), Json(body)).into_response()
    }
}
