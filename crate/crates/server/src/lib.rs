//! HTTP front end for an [`AnnotationStore`].
//!
//! The routes and bodies are described in [`reprompt_core::annostudio::wire`].

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use reprompt_core::annostudio::wire::{scale_labels, ErrorBody, Health, ItemView, NextResponse, ScoreRequest, ScoreResponse};
use reprompt_core::annostudio::{Aggregate, AnnotationError, AnnotationStore};
use serde::Deserialize;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;
use tracing::info;

pub struct ApiError(AnnotationError);

impl From<AnnotationError> for ApiError {
    fn from(e: AnnotationError) -> Self {
        ApiError(e)
    }
}

impl ApiError {
    fn status(&self) -> StatusCode {
        match self.0 {
            AnnotationError::NotFound(_) => StatusCode::NOT_FOUND,
            AnnotationError::OutOfRange(_) | AnnotationError::MissingAnnotator => StatusCode::BAD_REQUEST,
            AnnotationError::Conflict { .. } => StatusCode::CONFLICT,
            AnnotationError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { error: self.0.code().to_string(), message: self.0.to_string() };
        (self.status(), Json(body)).into_response()
    }
}

fn bad_request(code: &str, message: String) -> Response {
    (StatusCode::BAD_REQUEST, Json(ErrorBody { error: code.to_string(), message })).into_response()
}

type AppState = Arc<AnnotationStore>;

#[derive(Debug, Default, Deserialize)]
struct NextQuery {
    annotator: Option<String>,
    /// Comma-separated item ids to defer.
    skip: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
struct ItemQuery {
    annotator: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn health(State(store): State<AppState>) -> Json<Health> {
    let progress = store.progress(None);
    let opts = store.options();
    Json(Health {
        status: "ok".into(),
        items: progress.total,
        scored: progress.scored,
        blind: opts.blind,
        multi_annotator: opts.multi_annotator,
        scale: scale_labels(),
    })
}

async fn next_item(State(store): State<AppState>, Query(q): Query<NextQuery>) -> Json<NextResponse> {
    let skip: Vec<String> = q
        .skip
        .as_deref()
        .unwrap_or("")
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect();
    let annotator = q.annotator.as_deref().filter(|a| !a.is_empty());
    Json(store.next_unscored(annotator, &skip))
}

async fn get_item(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ItemQuery>,
) -> Result<Json<ItemView>, ApiError> {
    Ok(Json(store.view(&id, q.annotator.as_deref())?))
}

async fn submit_score(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<ScoreRequest>,
) -> Result<Json<ScoreResponse>, ApiError> {
    let blocking_store = store.clone();
    let annotator = req.annotator_id.clone();
    // the log append fsyncs, so keep it off the async workers
    let item = tokio::task::spawn_blocking(move || {
        blocking_store.submit_score(&id, req.score, &req.annotator_id, req.allow_revise)
    })
    .await
    .map_err(|e| AnnotationError::Storage(format!("score task failed: {e}")))??;
    info!(item = %item.item_id, annotator = %annotator, "score recorded");
    let scope = store.options().multi_annotator.then_some(annotator.as_str());
    Ok(Json(ScoreResponse {
        item: ItemView::of(&item, store.options().blind, Some(annotator.as_str())),
        progress: store.progress(scope),
    }))
}

async fn aggregate(State(store): State<AppState>) -> Json<Aggregate> {
    Json(store.aggregate())
}

async fn export(State(store): State<AppState>, Query(q): Query<ExportQuery>) -> Response {
    match q.format.as_deref().unwrap_or("jsonl") {
        "jsonl" => ([(header::CONTENT_TYPE, "application/x-ndjson")], store.export_jsonl()).into_response(),
        "csv" => ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], store.export_csv()).into_response(),
        other => bad_request("invalid_argument", format!("unknown export format {other:?}; use csv or jsonl")),
    }
}

/// The API router, optionally serving built UI assets from `static_dir`.
pub fn router(store: Arc<AnnotationStore>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/items/next", get(next_item))
        .route("/api/items/{id}", get(get_item))
        .route("/api/items/{id}/score", post(submit_score))
        .route("/api/aggregate", get(aggregate))
        .route("/api/export", get(export))
        .with_state(store);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Binds `addr` and serves until `shutdown` resolves.
pub async fn serve(
    addr: SocketAddr,
    app: Router,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    serve_on(TcpListener::bind(addr).await?, app, shutdown).await
}

/// Serves on an already bound listener until `shutdown` resolves.
pub async fn serve_on(
    listener: TcpListener,
    app: Router,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    info!(addr = %listener.local_addr()?, "annotation service listening");
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}
