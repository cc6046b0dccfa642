//! Clients for experimental system endpoints.
//!
//! A live system answers two GET routes returning `{"itemlist": [...]}`:
//! `/ranking?query=<text>&qid=<id>` and
//! `/recommendation/datasets?item_id=<id>`, plus `/test` for liveness.
//! The serving core applies the deadline; implementations only transport.

use livelab_core::model::{DocId, QueryId, SeedId};
use livelab_core::wire::ItemListResponse;
use std::future::Future;
use std::pin::Pin;
use thiserror::Error;

pub type BoxFuture<'a, T> = Pin<Box<dyn Future<Output = T> + Send + 'a>>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EndpointError {
    #[error("endpoint deadline exceeded")]
    Timeout,
    #[error("transport: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

/// Transport to one experimental system.
pub trait SystemEndpoint: Send + Sync {
    fn fetch_ranking<'a>(
        &'a self,
        query_text: &'a str,
        qid: &'a QueryId,
    ) -> BoxFuture<'a, Result<Vec<DocId>, EndpointError>>;

    fn fetch_recommendation<'a>(
        &'a self,
        item_id: &'a SeedId,
    ) -> BoxFuture<'a, Result<Vec<DocId>, EndpointError>>;

    fn liveness<'a>(&'a self) -> BoxFuture<'a, Result<(), EndpointError>>;
}

/// HTTP implementation of the system-endpoint protocol.
pub struct HttpEndpoint {
    base: String,
    client: reqwest::Client,
}

impl HttpEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base: base_url.into().trim_end_matches('/').to_string(),
            client: reqwest::Client::new(),
        }
    }

    async fn get_items(&self, url: String) -> Result<Vec<DocId>, EndpointError> {
        let response = self
            .client
            .get(&url)
            .send()
            .await
            .map_err(|e| EndpointError::Transport(e.to_string()))?;
        if !response.status().is_success() {
            return Err(EndpointError::Transport(format!(
                "status {}",
                response.status()
            )));
        }
        let body: ItemListResponse = response
            .json()
            .await
            .map_err(|e| EndpointError::Malformed(e.to_string()))?;
        Ok(body.itemlist)
    }
}

impl SystemEndpoint for HttpEndpoint {
    fn fetch_ranking<'a>(
        &'a self,
        query_text: &'a str,
        qid: &'a QueryId,
    ) -> BoxFuture<'a, Result<Vec<DocId>, EndpointError>> {
        Box::pin(async move {
            let url = format!(
                "{}/ranking?query={}&qid={}",
                self.base,
                urlencode(query_text),
                urlencode(qid.as_str())
            );
            self.get_items(url).await
        })
    }

    fn fetch_recommendation<'a>(
        &'a self,
        item_id: &'a SeedId,
    ) -> BoxFuture<'a, Result<Vec<DocId>, EndpointError>> {
        Box::pin(async move {
            let url = format!(
                "{}/recommendation/datasets?item_id={}",
                self.base,
                urlencode(item_id.as_str())
            );
            self.get_items(url).await
        })
    }

    fn liveness<'a>(&'a self) -> BoxFuture<'a, Result<(), EndpointError>> {
        Box::pin(async move {
            let url = format!("{}/test", self.base);
            let response = self
                .client
                .get(&url)
                .send()
                .await
                .map_err(|e| EndpointError::Transport(e.to_string()))?;
            if response.status().is_success() {
                Ok(())
            } else {
                Err(EndpointError::Transport(format!(
                    "status {}",
                    response.status()
                )))
            }
        })
    }
}

/// Percent-encodes everything outside the query-safe unreserved set.
fn urlencode(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for byte in value.bytes() {
        match byte {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => {
                out.push(byte as char);
            }
            _ => {
                out.push('%');
                out.push_str(&format!("{byte:02X}"));
            }
        }
    }
    out
}
