use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::{Deserialize, Serialize};

use crate::bank::{ChoiceSchema, QuestionPayload, Task};
use crate::error::ServiceError;
use crate::report::{compute_study_report, StudyReport};
use crate::store::{AnnotationRecord, NewResponse, Store};

#[derive(Clone)]
pub struct AppState {
    store: Arc<Mutex<Store>>,
}

impl AppState {
    pub fn new(store: Store) -> Self {
        AppState {
            store: Arc::new(Mutex::new(store)),
        }
    }

    pub fn lock(&self) -> MutexGuard<'_, Store> {
        // A panic mid-request cannot leave the store half-written: every
        // mutation is applied only after its log line is synced.
        self.store.lock().unwrap_or_else(|p| p.into_inner())
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TaskDescriptor {
    pub task: Task,
    pub number: u8,
    pub title: String,
    pub question_count: usize,
    pub choice: ChoiceSchema,
}

#[derive(Debug, Deserialize)]
pub struct SessionRequest {
    pub rater_id: String,
    pub task: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionResponse {
    pub session_id: String,
    pub rater_id: String,
    pub task: Task,
    pub questions: Vec<String>,
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ServiceError::BadRequest(e.body_text()))
}

async fn list_tasks(State(state): State<AppState>) -> Json<Vec<TaskDescriptor>> {
    let store = state.lock();
    Json(
        store
            .banks()
            .map(|b| TaskDescriptor {
                task: b.task,
                number: b.task.number(),
                title: b.task.title().to_string(),
                question_count: b.questions.len(),
                choice: b.task.choice_schema(),
            })
            .collect(),
    )
}

async fn create_session(
    State(state): State<AppState>,
    payload: Result<Json<SessionRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionResponse>), ServiceError> {
    let req = body(payload)?;
    let task: Task = req.task.parse()?;
    let mut store = state.lock();
    let s = store.create_session(&req.rater_id, task, Utc::now())?;
    let questions = store.question_ids(task);
    Ok((
        StatusCode::CREATED,
        Json(SessionResponse {
            session_id: s.session_id,
            rater_id: s.rater_id,
            task,
            questions,
        }),
    ))
}

async fn get_question(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<QuestionPayload>, ServiceError> {
    Ok(Json(state.lock().question(&id)?.payload()))
}

async fn submit_response(
    State(state): State<AppState>,
    payload: Result<Json<NewResponse>, JsonRejection>,
) -> Result<(StatusCode, Json<AnnotationRecord>), ServiceError> {
    let req = body(payload)?;
    let record = state.lock().submit(req, Utc::now())?;
    Ok((StatusCode::CREATED, Json(record)))
}

async fn report(State(state): State<AppState>) -> Result<Json<StudyReport>, ServiceError> {
    Ok(Json(compute_study_report(&state.lock())?))
}

pub fn api_router(state: AppState) -> Router {
    Router::new()
        .route("/api/tasks", get(list_tasks))
        .route("/api/sessions", post(create_session))
        .route("/api/questions/{id}", get(get_question))
        .route("/api/responses", post(submit_response))
        .route("/api/report", get(report))
        .with_state(state)
}
