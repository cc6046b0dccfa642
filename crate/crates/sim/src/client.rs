//! One driving surface over both deployment shapes.
//!
//! A campaign script talks to a [`Platform`] and never learns whether the
//! calls stay in process or cross HTTP. Both variants go through the same
//! serving code; the wire variant additionally exercises routing, query
//! parsing, and JSON round-trips.

use livelab_app::AppCore;
use livelab_core::log::Segment;
use livelab_core::model::{FeedbackEvent, SeedId, SessionId, TimestampMs};
use livelab_core::model::QueryId;
use livelab_core::wire::{FeedbackAck, RankingPayload, RecommendationPayload};
use livelab_server::ServerCore;
use std::sync::{Arc, Mutex};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DriveError {
    #[error("app: {0}")]
    App(String),
    #[error("server: {0}")]
    Server(String),
    #[error("transport: {0}")]
    Transport(String),
}

/// The platform under test, reachable in process or over HTTP.
pub enum Platform {
    InProc {
        app: Arc<AppCore>,
        server: Arc<ServerCore>,
        /// Copies of every shipped segment, for offline recomputation.
        retained: Mutex<Vec<Segment>>,
    },
    Wire {
        app_base: String,
        server_base: String,
        http: reqwest::Client,
    },
}

impl Platform {
    pub fn in_proc(app: Arc<AppCore>, server: Arc<ServerCore>) -> Self {
        Platform::InProc {
            app,
            server,
            retained: Mutex::new(Vec::new()),
        }
    }

    pub fn wire(app_base: String, server_base: String) -> Self {
        Platform::Wire {
            app_base,
            server_base,
            http: reqwest::Client::new(),
        }
    }

    /// Every segment shipped so far (in-process drives only; the wire
    /// variant does not see segment internals).
    pub fn take_segments(&self) -> Vec<Segment> {
        match self {
            Platform::InProc { retained, .. } => {
                std::mem::take(&mut *retained.lock().expect("retained lock"))
            }
            Platform::Wire { .. } => Vec::new(),
        }
    }

    pub async fn ranking(
        &self,
        session_id: &SessionId,
        qid: &QueryId,
        page_size: Option<usize>,
        at: TimestampMs,
    ) -> Result<RankingPayload, DriveError> {
        match self {
            Platform::InProc { app, .. } => app
                .handle_ranking(livelab_app::RankingRequest {
                    session_id: session_id.clone(),
                    query_id: Some(qid.clone()),
                    query_text: None,
                    page_size,
                    at: Some(at),
                })
                .await
                .map_err(|e| DriveError::App(e.to_string())),
            Platform::Wire { app_base, http, .. } => {
                let mut url = format!(
                    "{app_base}/ranking?session_id={}&qid={}&at={}",
                    session_id.as_str(),
                    qid.as_str(),
                    at.0
                );
                if let Some(n) = page_size {
                    url.push_str(&format!("&page_size={n}"));
                }
                get_json(http, &url).await
            }
        }
    }

    pub async fn recommendation(
        &self,
        session_id: &SessionId,
        item_id: &SeedId,
        k: Option<usize>,
        at: TimestampMs,
    ) -> Result<RecommendationPayload, DriveError> {
        match self {
            Platform::InProc { app, .. } => app
                .handle_recommendation(livelab_app::RecommendationRequest {
                    session_id: session_id.clone(),
                    item_id: item_id.clone(),
                    k,
                    at: Some(at),
                })
                .await
                .map_err(|e| DriveError::App(e.to_string())),
            Platform::Wire { app_base, http, .. } => {
                let mut url = format!(
                    "{app_base}/recommendation/datasets?session_id={}&item_id={}&at={}",
                    session_id.as_str(),
                    item_id.as_str(),
                    at.0
                );
                if let Some(n) = k {
                    url.push_str(&format!("&k={n}"));
                }
                get_json(http, &url).await
            }
        }
    }

    pub async fn feedback(&self, event: FeedbackEvent) -> Result<FeedbackAck, DriveError> {
        match self {
            Platform::InProc { app, .. } => app
                .record_feedback(event)
                .map_err(|e| DriveError::App(e.to_string())),
            Platform::Wire { app_base, http, .. } => {
                let response = http
                    .post(format!("{app_base}/feedback"))
                    .json(&event)
                    .send()
                    .await
                    .map_err(|e| DriveError::Transport(e.to_string()))?;
                read_json(response).await
            }
        }
    }

    /// Ships every accumulated log segment to the aggregation server.
    /// Returns how many segments went over.
    pub async fn flush(&self) -> Result<u64, DriveError> {
        match self {
            Platform::InProc {
                app,
                server,
                retained,
            } => {
                let mut shipped = 0;
                while let Some(segment) = app.next_segment() {
                    let seq = segment.seq;
                    retained
                        .lock()
                        .expect("retained lock")
                        .push(segment.clone());
                    let ack = server.ingest_segment(segment);
                    app.mark_shipped(ack.seq);
                    debug_assert_eq!(ack.seq, seq);
                    shipped += 1;
                }
                Ok(shipped)
            }
            Platform::Wire { app_base, http, .. } => {
                #[derive(serde::Deserialize)]
                struct FlushAck {
                    status: String,
                }
                let mut shipped = 0;
                loop {
                    let response = http
                        .post(format!("{app_base}/internal/snapshot"))
                        .send()
                        .await
                        .map_err(|e| DriveError::Transport(e.to_string()))?;
                    let ack: FlushAck = read_json(response).await?;
                    if ack.status == "empty" {
                        return Ok(shipped);
                    }
                    shipped += 1;
                }
            }
        }
    }

    /// The aggregation dashboard as plain JSON, suitable for byte-level
    /// comparison after canonical re-serialization.
    pub async fn report(&self) -> Result<serde_json::Value, DriveError> {
        match self {
            Platform::InProc { server, .. } => serde_json::to_value(server.report())
                .map_err(|e| DriveError::Server(e.to_string())),
            Platform::Wire {
                server_base, http, ..
            } => {
                let response = http
                    .get(format!("{server_base}/api/report"))
                    .send()
                    .await
                    .map_err(|e| DriveError::Transport(e.to_string()))?;
                read_json(response).await
            }
        }
    }
}

async fn get_json<T: serde::de::DeserializeOwned>(
    http: &reqwest::Client,
    url: &str,
) -> Result<T, DriveError> {
    let response = http
        .get(url)
        .send()
        .await
        .map_err(|e| DriveError::Transport(e.to_string()))?;
    read_json(response).await
}

async fn read_json<T: serde::de::DeserializeOwned>(
    response: reqwest::Response,
) -> Result<T, DriveError> {
    let status = response.status();
    let body = response
        .text()
        .await
        .map_err(|e| DriveError::Transport(e.to_string()))?;
    if !status.is_success() {
        return Err(DriveError::App(format!("{status}: {body}")));
    }
    serde_json::from_str(&body).map_err(|e| DriveError::Transport(format!("{e}: {body}")))
}
