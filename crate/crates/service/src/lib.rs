//! HTTP service for running annotation studies: direct 1-5 ratings,
//! cross-image comparisons and same-image caption comparisons.
//!
//! Routes:
//!
//! | method | path                  |                                   |
//! |--------|-----------------------|-----------------------------------|
//! | GET    | `/api/tasks`          | task descriptors                  |
//! | POST   | `/api/sessions`       | open a session, get question ids  |
//! | GET    | `/api/questions/{id}` | question payload (no ground truth)|
//! | POST   | `/api/responses`      | record one answer (201)           |
//! | GET    | `/api/report`         | timing and agreement report       |
//!
//! Answers go to an append-only JSONL log that is synced before each
//! acknowledgment and replayed on start.

pub mod api;
pub mod bank;
pub mod error;
pub mod report;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;

use axum::Router;
use tower_http::services::ServeDir;

pub use api::{api_router, AppState};
pub use bank::{Question, QuestionBank, Task};
pub use error::ServiceError;
pub use report::{compute_study_report, StudyReport};
pub use store::{AnnotationRecord, SessionPolicy, Store};

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Directory for the response and session logs; `None` keeps them in memory.
    pub data_dir: Option<PathBuf>,
    /// JSON question banks, one file per task. Empty means the bundled study banks.
    pub bank_files: Vec<PathBuf>,
    pub static_dir: Option<PathBuf>,
    pub media_dir: Option<PathBuf>,
    pub policy: SessionPolicy,
}

impl ServiceConfig {
    pub fn banks(&self) -> Result<Vec<QuestionBank>, ServiceError> {
        if self.bank_files.is_empty() {
            return Ok(bank::ALL_TASKS.into_iter().map(QuestionBank::study).collect());
        }
        self.bank_files.iter().map(|p| QuestionBank::load(p)).collect()
    }
}

pub fn build_app(cfg: &ServiceConfig) -> Result<Router, ServiceError> {
    let store = Store::open(cfg.banks()?, cfg.policy, cfg.data_dir.as_deref())?;
    let mut app = api_router(AppState::new(store));
    if let Some(media) = &cfg.media_dir {
        app = app.nest_service("/media", ServeDir::new(media));
    }
    if let Some(dir) = &cfg.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    Ok(app)
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(addr: SocketAddr, cfg: &ServiceConfig) -> Result<(), ServiceError> {
    let app = build_app(cfg)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| ServiceError::Io(format!("bind {addr}: {e}")))?;
    tracing::info!(
        "listening on {}",
        listener.local_addr().map(|a| a.to_string()).unwrap_or_default()
    );
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServiceError::Io(e.to_string()))
}
