//! HTTP surface of the aggregation server.
//!
//! Registry and snapshot routes require a participant bearer token; the
//! dashboard routes are open so site operators can put the report on a
//! screen without credential plumbing.

use crate::core::ServerCore;
use crate::error::ServerError;
use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use livelab_core::log::Segment;
use livelab_core::model::{SystemId, SystemRecord};
use livelab_core::wire::{ErrorBody, HealthBody, StatusChange};
use std::sync::Arc;

impl IntoResponse for ServerError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status_code()).expect("static status codes");
        (status, Json(ErrorBody::new(self.to_string()))).into_response()
    }
}

pub fn router(core: Arc<ServerCore>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/api/systems", post(register_system).get(list_systems))
        .route("/api/systems/{id}", get(get_system))
        .route("/api/systems/{id}/run", put(upload_run).get(download_run))
        .route("/api/systems/{id}/status", put(set_status))
        .route("/api/snapshots", post(ingest_snapshot))
        .route("/api/report", get(report_json))
        .route("/report.txt", get(report_text))
        .with_state(core)
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers
        .get(axum::http::header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
}

fn system_id(raw: &str) -> Result<SystemId, ServerError> {
    SystemId::new(raw).map_err(|e| ServerError::BadRequest(e.to_string()))
}

async fn healthz() -> Json<HealthBody> {
    Json(HealthBody::ok())
}

async fn register_system(
    State(core): State<Arc<ServerCore>>,
    headers: HeaderMap,
    Json(record): Json<SystemRecord>,
) -> Result<impl IntoResponse, ServerError> {
    let participant = core.authenticate(bearer(&headers))?.to_string();
    let entry = core.register_system(record, &participant)?;
    Ok((StatusCode::CREATED, Json(entry)))
}

async fn list_systems(
    State(core): State<Arc<ServerCore>>,
    headers: HeaderMap,
) -> Result<impl IntoResponse, ServerError> {
    core.authenticate(bearer(&headers))?;
    Ok(Json(core.entries()))
}

async fn get_system(
    State(core): State<Arc<ServerCore>>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ServerError> {
    core.authenticate(bearer(&headers))?;
    Ok(Json(core.entry(&system_id(&id)?)?))
}

async fn upload_run(
    State(core): State<Arc<ServerCore>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: String,
) -> Result<impl IntoResponse, ServerError> {
    let participant = core.authenticate(bearer(&headers))?.to_string();
    let outcome = core.upload_run(&system_id(&id)?, &body, &participant)?;
    Ok(Json(outcome))
}

async fn download_run(
    State(core): State<Arc<ServerCore>>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ServerError> {
    core.authenticate(bearer(&headers))?;
    let text = core.run_text(&system_id(&id)?)?;
    Ok(([("content-type", "text/plain; charset=utf-8")], text))
}

async fn set_status(
    State(core): State<Arc<ServerCore>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    Json(change): Json<StatusChange>,
) -> Result<impl IntoResponse, ServerError> {
    let participant = core.authenticate(bearer(&headers))?.to_string();
    let entry = core.set_status(&system_id(&id)?, change.status, &participant)?;
    Ok(Json(entry))
}

async fn ingest_snapshot(
    State(core): State<Arc<ServerCore>>,
    headers: HeaderMap,
    Json(segment): Json<Segment>,
) -> Result<impl IntoResponse, ServerError> {
    core.authenticate(bearer(&headers))?;
    Ok(Json(core.ingest_segment(segment)))
}

async fn report_json(State(core): State<Arc<ServerCore>>) -> Response {
    let report = core.report();
    (
        [("content-type", "application/json")],
        report.to_json(),
    )
        .into_response()
}

async fn report_text(State(core): State<Arc<ServerCore>>) -> Response {
    let report = core.report();
    (
        [("content-type", "text/plain; charset=utf-8")],
        report.render_text(),
    )
        .into_response()
}
