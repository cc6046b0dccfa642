//! Shipping log segments to the aggregation server.
//!
//! The sink is a trait so harnesses can hand segments to an in-process
//! server without HTTP. Shipping is at-least-once: the server dedupes by
//! (app_id, seq), so retrying a segment after a transport error is safe.

use crate::endpoint::BoxFuture;
use livelab_core::log::Segment;
use livelab_core::wire::SnapshotAck;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SinkError {
    #[error("snapshot transport: {0}")]
    Transport(String),
    #[error("server rejected snapshot: {0}")]
    Rejected(String),
}

pub trait SnapshotSink: Send + Sync {
    fn ship<'a>(&'a self, segment: Segment) -> BoxFuture<'a, Result<SnapshotAck, SinkError>>;
}

/// POSTs segments to `{base}/api/snapshots` with a bearer token.
pub struct HttpSink {
    base: String,
    token: String,
    client: reqwest::Client,
}

impl HttpSink {
    pub fn new(base: impl Into<String>, token: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            token: token.into(),
            client: reqwest::Client::builder()
                .timeout(Duration::from_secs(10))
                .build()
                .expect("reqwest client"),
        }
    }
}

impl SnapshotSink for HttpSink {
    fn ship<'a>(&'a self, segment: Segment) -> BoxFuture<'a, Result<SnapshotAck, SinkError>> {
        Box::pin(async move {
            let resp = self
                .client
                .post(format!("{}/api/snapshots", self.base))
                .bearer_auth(&self.token)
                .json(&segment)
                .send()
                .await
                .map_err(|e| SinkError::Transport(e.to_string()))?;
            let status = resp.status();
            if !status.is_success() {
                let body = resp.text().await.unwrap_or_default();
                return Err(SinkError::Rejected(format!("{status}: {body}")));
            }
            resp.json::<SnapshotAck>()
                .await
                .map_err(|e| SinkError::Transport(format!("bad ack body: {e}")))
        })
    }
}
