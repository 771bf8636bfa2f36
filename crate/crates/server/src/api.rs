//! HTTP routes over a [`SessionStore`].

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use crate::error::ServiceError;
use crate::session::{flexible_id, CatalogItem, SessionConfig};
use crate::store::SessionStore;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    items: Vec<CatalogItem>,
    #[serde(default)]
    config: SessionConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerRequest {
    query_id: String,
    #[serde(deserialize_with = "flexible_id")]
    winner: String,
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::Validation(format!("invalid request body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ServiceError::Internal(e.to_string()))?
}

async fn create_session(State(store): State<Arc<SessionStore>>, body: Bytes) -> Result<impl IntoResponse, ServiceError> {
    let req: CreateRequest = parse(&body)?;
    let handle = blocking(move || store.create(req.items, req.config)).await?;
    let id = handle.summary().session_id.clone();
    tracing::info!(session = %id, "created session");
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id }))))
}

async fn next_query(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    let handle = store.get(&id)?;
    Ok(Json(blocking(move || handle.next_query()).await?))
}

async fn submit_answer(State(store): State<Arc<SessionStore>>, Path(id): Path<String>, body: Bytes) -> Result<impl IntoResponse, ServiceError> {
    let handle = store.get(&id)?;
    let req: AnswerRequest = parse(&body)?;
    Ok(Json(blocking(move || handle.submit_answer(&req.query_id, &req.winner)).await?))
}

async fn get_state(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(store.get(&id)?.summary().as_ref().clone()))
}

async fn not_found() -> ServiceError {
    ServiceError::NotFound("no such route".into())
}

/// The wire API; static assets from `static_dir` are served for other paths.
pub fn router(store: Arc<SessionStore>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_state))
        .route("/sessions/{id}/query", post(next_query))
        .route("/sessions/{id}/answer", post(submit_answer))
        .with_state(store);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(not_found),
    }
}
