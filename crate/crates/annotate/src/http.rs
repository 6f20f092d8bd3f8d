//! HTTP + JSON front end.
//!
//! | route                     | success                 | errors          |
//! |---------------------------|-------------------------|-----------------|
//! | `GET  /api/next`          | 200 task, 204 none left | 422             |
//! | `POST /api/votes`         | 201                     | 404, 409, 422   |
//! | `GET  /api/progress`      | 200                     |                 |
//! | `GET  /api/export`        | 200 JSON Lines          |                 |
//! | `POST /api/import`        | 201                     | 409, 422        |

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use crate::{AnnotationService, ServiceError};

type Shared = Arc<AnnotationService>;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, body) = match &self {
            ServiceError::NotFound(id) => (
                StatusCode::NOT_FOUND,
                json!({"error": "not_found", "sentence_id": id}),
            ),
            ServiceError::DuplicateVote => (StatusCode::CONFLICT, json!({"error": "duplicate_vote"})),
            ServiceError::Complete => (StatusCode::CONFLICT, json!({"error": "complete"})),
            ServiceError::DuplicateId(id) => (
                StatusCode::CONFLICT,
                json!({"error": "duplicate_id", "id": id}),
            ),
            ServiceError::Validation(detail) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({"error": "validation", "detail": detail}),
            ),
            ServiceError::Io(e) => {
                tracing::error!(error = %e, "event log write failed");
                (
                    StatusCode::INTERNAL_SERVER_ERROR,
                    json!({"error": "storage"}),
                )
            }
        };
        (status, Json(body)).into_response()
    }
}

#[derive(Deserialize)]
struct NextQuery {
    #[serde(default)]
    annotator: String,
}

async fn next(State(svc): State<Shared>, Query(q): Query<NextQuery>) -> Result<Response, ServiceError> {
    Ok(match svc.next_task(&q.annotator)? {
        Some(task) => (StatusCode::OK, Json(task)).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

#[derive(Deserialize)]
struct VoteBody {
    annotator: String,
    sentence_id: String,
    value: bool,
}

async fn vote(State(svc): State<Shared>, body: Bytes) -> Result<Response, ServiceError> {
    let vote: VoteBody = serde_json::from_slice(&body)
        .map_err(|e| ServiceError::Validation(format!("vote body: {e}")))?;
    tokio::task::spawn_blocking(move || svc.submit_vote(&vote.annotator, &vote.sentence_id, vote.value))
        .await
        .expect("vote task panicked")?;
    Ok((StatusCode::CREATED, Json(json!({"status": "recorded"}))).into_response())
}

async fn progress(State(svc): State<Shared>) -> Response {
    Json(svc.progress()).into_response()
}

#[derive(Deserialize)]
struct ExportQuery {
    #[serde(default)]
    include_partial: bool,
}

async fn export(State(svc): State<Shared>, Query(q): Query<ExportQuery>) -> Response {
    (
        [(header::CONTENT_TYPE, "application/x-ndjson; charset=utf-8")],
        svc.export_jsonl(q.include_partial),
    )
        .into_response()
}

async fn import(State(svc): State<Shared>, body: Bytes) -> Result<Response, ServiceError> {
    let text = String::from_utf8(body.to_vec())
        .map_err(|_| ServiceError::Validation("import body is not UTF-8".into()))?;
    let imported = tokio::task::spawn_blocking(move || svc.import_jsonl(&text))
        .await
        .expect("import task panicked")?;
    Ok((StatusCode::CREATED, Json(json!({"imported": imported}))).into_response())
}

pub fn router(service: Shared) -> Router {
    Router::new()
        .route("/api/next", get(next))
        .route("/api/votes", post(vote))
        .route("/api/progress", get(progress))
        .route("/api/export", get(export))
        .route("/api/import", post(import))
        .with_state(service)
}

/// Bind and serve until the future is dropped or ctrl-c arrives.
pub async fn serve(addr: SocketAddr, service: Shared) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "annotation service listening");
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Serve on an ephemeral loopback port in the background. Abort the handle
/// to stop.
pub async fn spawn_local(service: Shared) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", 0)).await?;
    let addr = listener.local_addr()?;
    let handle = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, router(service)).await {
            tracing::error!(error = %e, "server stopped");
        }
    });
    Ok((addr, handle))
}
