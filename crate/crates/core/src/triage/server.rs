use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tokio::sync::RwLock;

use super::session::TriageSession;
use crate::error::Error;
use crate::pipeline::ErrorCategory;

pub type SharedSession = Arc<RwLock<TriageSession>>;

impl IntoResponse for Error {
    fn into_response(self) -> Response {
        let status = match &self {
            Error::UnknownFrame(_) => StatusCode::NOT_FOUND,
            Error::NoCategorizedErrors | Error::InvalidDelta(_) => StatusCode::CONFLICT,
            Error::Parse { .. } | Error::InvalidConfig(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = serde_json::json!({ "error": self.class(), "message": self.to_string() });
        (status, Json(body)).into_response()
    }
}

#[derive(Debug, Deserialize)]
struct PageQuery {
    page: Option<usize>,
    per_page: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct CategoryBody {
    category: ErrorCategory,
    #[serde(default)]
    note: String,
}

pub const DEFAULT_PER_PAGE: usize = 50;

/// Routes of the review service. Reads share the session lock; category
/// writes and plan application hold it exclusively, so the store's sync
/// completes before any other request sees the change.
pub fn router(session: SharedSession) -> Router {
    Router::new()
        .route("/errors", get(list_errors))
        .route("/errors/{frame_id}/category", post(set_category))
        .route("/frames/{frame_id}", get(frame_image))
        .route("/plan", get(get_plan))
        .route("/plan/apply", post(apply_plan))
        .with_state(session)
}

async fn list_errors(State(s): State<SharedSession>, Query(q): Query<PageQuery>) -> Response {
    let s = s.read().await;
    Json(s.page(q.page.unwrap_or(1), q.per_page.unwrap_or(DEFAULT_PER_PAGE))).into_response()
}

async fn set_category(
    State(s): State<SharedSession>,
    Path(frame_id): Path<String>,
    Json(body): Json<CategoryBody>,
) -> Result<Response, Error> {
    let mut s = s.write().await;
    let a = s.categorize(&frame_id, body.category, &body.note)?;
    Ok(Json(a).into_response())
}

async fn frame_image(State(s): State<SharedSession>, Path(frame_id): Path<String>) -> Result<Response, Error> {
    let path = s.read().await.crop_path(&frame_id)?;
    let bytes = tokio::fs::read(&path).await.map_err(|e| Error::io(&path, e))?;
    let kind = match path.extension().and_then(|e| e.to_str()) {
        Some("png") => "image/png",
        _ => "image/x-portable-pixmap",
    };
    Ok(([(header::CONTENT_TYPE, kind)], bytes).into_response())
}

async fn get_plan(State(s): State<SharedSession>) -> Result<Response, Error> {
    Ok(Json(s.read().await.plan()?).into_response())
}

async fn apply_plan(State(s): State<SharedSession>) -> Result<Response, Error> {
    Ok(Json(s.write().await.apply()?).into_response())
}

/// Binds `addr` and serves until the future is dropped or the process ends.
pub async fn serve(session: TriageSession, addr: SocketAddr) -> crate::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| Error::Bind {
        address: addr.to_string(),
        source,
    })?;
    let local = listener.local_addr().map_err(|source| Error::Bind {
        address: addr.to_string(),
        source,
    })?;
    eprintln!("triage service listening on http://{local}");
    axum::serve(listener, router(Arc::new(RwLock::new(session))))
        .await
        .map_err(|source| Error::Bind {
            address: local.to_string(),
            source,
        })
}
