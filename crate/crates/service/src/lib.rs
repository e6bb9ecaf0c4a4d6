//! HTTP facade for interactive labeling sessions.
//!
//! | method | path                    | body / response                       |
//! |--------|-------------------------|---------------------------------------|
//! | POST   | `/sessions`             | `CreateSession` → `SessionDescriptor` |
//! | GET    | `/sessions/{id}`        | `SessionDescriptor`                   |
//! | GET    | `/sessions/{id}/batch`  | `BatchResponse`                       |
//! | POST   | `/sessions/{id}/labels` | `LabelSubmission` → `SubmitResponse`  |
//! | GET    | `/sessions/{id}/view`   | `ViewResponse`                        |
//!
//! Errors come back as `{"error": ...}` with a 4xx/5xx status.

pub mod api;
mod error;
mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use viewclean::catalog::TaskCache;
use viewclean::classifier::Label;
use viewclean::engine::Session;
use viewclean::PairKey;

use api::{
    BatchResponse, CreateSession, LabelSubmission, NamedView, SessionDescriptor, SubmitResponse, ViewResponse,
};
pub use error::ApiError;
pub use store::{read_checkpoint, Checkpoint};
use store::{Handle, Store};

#[derive(Clone)]
pub struct AppState {
    store: Arc<Store>,
}

impl AppState {
    /// `checkpoints`: directory for per-session checkpoints, or `None` to
    /// keep sessions in memory only.
    pub fn new(cache: TaskCache, checkpoints: Option<PathBuf>) -> AppState {
        AppState {
            store: Arc::new(Store::new(cache, checkpoints)),
        }
    }

    /// Replays checkpoints found on disk. Call before serving.
    pub fn restore(&self) -> Result<usize, ApiError> {
        self.store.restore()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(describe))
        .route("/sessions/{id}/batch", get(next_batch))
        .route("/sessions/{id}/labels", post(submit_labels))
        .route("/sessions/{id}/view", get(current_view))
        .with_state(state)
}

pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::BadRequest(e.body_text()))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
}

fn named(session: &Session, views: &[viewclean::ViewResult]) -> Vec<NamedView> {
    session
        .prepared()
        .view_names()
        .into_iter()
        .zip(views)
        .map(|(name, result)| NamedView {
            name: name.to_string(),
            result: result.clone(),
        })
        .collect()
}

async fn create_session(
    State(state): State<AppState>,
    headers: HeaderMap,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionDescriptor>), ApiError> {
    let mut request = body(payload)?;
    if let Some(key) = headers.get("idempotency-key") {
        let key = key
            .to_str()
            .map_err(|_| ApiError::BadRequest("Idempotency-Key is not visible ASCII".into()))?;
        request.idempotency_key = Some(key.to_string());
    }
    let store = state.store.clone();
    let descriptor = blocking(move || store.create(request)).await?;
    Ok((StatusCode::CREATED, Json(descriptor)))
}

async fn describe(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionDescriptor>, ApiError> {
    let handle = state.store.get(&id)?;
    let entry = handle.lock().expect("session poisoned");
    Ok(Json(entry.descriptor()))
}

async fn next_batch(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<BatchResponse>, ApiError> {
    let handle = state.store.get(&id)?;
    let entry = handle.lock().expect("session poisoned");
    let s = &entry.session;
    Ok(Json(BatchResponse {
        session: id,
        stopped: s.stopped().is_some(),
        reason: s.stopped(),
        schema: s.prepared().relation().schema().to_vec(),
        pairs: s.payload(),
        labels_used: s.labels_used(),
        budget: s.config().budget,
    }))
}

fn submit(handle: Handle, store: Arc<Store>, answers: Vec<(PairKey, Label)>) -> Result<SubmitResponse, ApiError> {
    let mut entry = handle.lock().expect("session poisoned");
    if entry.session.stopped().is_some() {
        return Err(ApiError::Stopped(entry.session.summary()));
    }
    // Checkpoint before publishing: if the write fails the label batch is
    // rolled back so memory and disk never disagree.
    let before = entry.session.clone();
    let record = entry.session.submit(&answers)?.clone();
    if let Err(e) = store.save(&entry) {
        entry.session = before;
        return Err(e);
    }
    let s = &entry.session;
    Ok(SubmitResponse {
        summary: s.summary(),
        view_change: record.view_change,
        record,
        views: named(s, s.current_views()),
    })
}

async fn submit_labels(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<LabelSubmission>, JsonRejection>,
) -> Result<Json<SubmitResponse>, ApiError> {
    let sub = body(payload)?;
    let handle = state.store.get(&id)?;
    let answers = sub.labels.iter().map(|l| (l.pair, l.label)).collect();
    let store = state.store.clone();
    Ok(Json(blocking(move || submit(handle, store, answers)).await?))
}

async fn current_view(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<ViewResponse>, ApiError> {
    let handle = state.store.get(&id)?;
    let entry = handle.lock().expect("session poisoned");
    let s = &entry.session;
    Ok(Json(ViewResponse {
        session: id,
        views: named(s, s.current_views()),
        dirty: named(s, &s.prepared().dirty),
        history: s.history().to_vec(),
        summary: s.summary(),
    }))
}

/// Digest of a live session, for replay checks.
pub fn session_digest(state: &AppState, id: &str) -> Result<String, ApiError> {
    let handle = state.store.get(id)?;
    let entry = handle.lock().expect("session poisoned");
    Ok(entry.session.digest())
}
