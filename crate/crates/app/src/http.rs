//! Public HTTP surface of the site app.
//!
//! `GET /ranking` and `GET /recommendation/datasets` serve panels,
//! `POST /feedback` records user events, `GET /healthz` answers liveness,
//! and `POST /internal/snapshot` cuts the pending log segment and ships it
//! to the aggregation server. The `at` parameter is a logical-clock
//! override used by harnesses; live traffic omits it.

use crate::core::{AppCore, RankingRequest, RecommendationRequest};
use crate::error::AppError;
use crate::snapshot::SnapshotSink;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use livelab_core::model::{
    FeedbackEvent, QueryId, SeedId, SessionId, TimestampMs,
};
use livelab_core::wire::{ErrorBody, FeedbackAck, HealthBody, RankingPayload, RecommendationPayload};
use serde::Deserialize;
use std::sync::Arc;

pub struct AppState {
    pub core: Arc<AppCore>,
    pub sink: Option<Arc<dyn SnapshotSink>>,
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status_code()).expect("static status codes");
        (status, Json(ErrorBody::new(self.to_string()))).into_response()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/ranking", get(ranking))
        .route("/recommendation/datasets", get(recommendation))
        .route("/feedback", post(feedback))
        .route("/healthz", get(healthz))
        .route("/internal/snapshot", post(snapshot))
        .with_state(state)
}

#[derive(Debug, Deserialize)]
struct RankingParams {
    session_id: String,
    #[serde(default)]
    qid: Option<String>,
    #[serde(default)]
    query: Option<String>,
    #[serde(default)]
    page_size: Option<usize>,
    #[serde(default)]
    at: Option<i64>,
}

async fn ranking(
    State(state): State<Arc<AppState>>,
    Query(params): Query<RankingParams>,
) -> Result<Json<RankingPayload>, AppError> {
    let request = RankingRequest {
        session_id: SessionId::new(params.session_id)
            .map_err(|e| AppError::BadRequest(e.to_string()))?,
        query_id: params
            .qid
            .map(QueryId::new)
            .transpose()
            .map_err(|e| AppError::BadRequest(e.to_string()))?,
        query_text: params.query,
        page_size: params.page_size,
        at: params.at.map(TimestampMs),
    };
    state.core.handle_ranking(request).await.map(Json)
}

#[derive(Debug, Deserialize)]
struct RecommendationParams {
    session_id: String,
    item_id: String,
    #[serde(default)]
    k: Option<usize>,
    #[serde(default)]
    at: Option<i64>,
}

async fn recommendation(
    State(state): State<Arc<AppState>>,
    Query(params): Query<RecommendationParams>,
) -> Result<Json<RecommendationPayload>, AppError> {
    let request = RecommendationRequest {
        session_id: SessionId::new(params.session_id)
            .map_err(|e| AppError::BadRequest(e.to_string()))?,
        item_id: SeedId::new(params.item_id)
            .map_err(|e| AppError::BadRequest(e.to_string()))?,
        k: params.k,
        at: params.at.map(TimestampMs),
    };
    state.core.handle_recommendation(request).await.map(Json)
}

async fn feedback(
    State(state): State<Arc<AppState>>,
    Json(event): Json<FeedbackEvent>,
) -> Result<Json<FeedbackAck>, AppError> {
    state.core.record_feedback(event).map(Json)
}

async fn healthz() -> Json<HealthBody> {
    Json(HealthBody::ok())
}

#[derive(Debug, serde::Serialize)]
#[serde(rename_all = "snake_case", tag = "status")]
enum SnapshotResult {
    /// Nothing accumulated since the last cut.
    Empty,
    Shipped { seq: u64, applied_through: u64 },
}

async fn snapshot(State(state): State<Arc<AppState>>) -> Response {
    let sink = match &state.sink {
        Some(sink) => sink.clone(),
        None => {
            return (
                StatusCode::CONFLICT,
                Json(ErrorBody::new("no aggregation server configured")),
            )
                .into_response();
        }
    };
    let Some(segment) = state.core.next_segment() else {
        return Json(SnapshotResult::Empty).into_response();
    };
    let seq = segment.seq;
    match sink.ship(segment).await {
        Ok(ack) => {
            state.core.mark_shipped(seq);
            Json(SnapshotResult::Shipped {
                seq,
                applied_through: ack.applied_through,
            })
            .into_response()
        }
        Err(e) => (
            StatusCode::BAD_GATEWAY,
            Json(ErrorBody::new(format!("segment {seq} not delivered: {e}"))),
        )
            .into_response(),
    }
}
