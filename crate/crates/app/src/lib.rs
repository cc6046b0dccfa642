//! Site-side serving component.
//!
//! Embeds experimental ranking and recommendation arms into a host site:
//! interleaves ranking arms against the production baseline, splits
//! recommendation traffic by session, logs every impression and feedback
//! event, and ships log segments to the aggregation server. The serving
//! core is transport-free; the HTTP layer in [`http`] and in-process
//! harnesses drive the same code paths.

pub mod config;
pub mod core;
pub mod endpoint;
pub mod error;
pub mod http;
pub mod logstore;
pub mod snapshot;

pub use config::{build_app, AppConfig, BuiltApp, ConfigError};
pub use core::{
    AdhocLane, AppCore, AppSetup, RankingRequest, RecLane, RecommendationRequest, SystemSource,
    DEFAULT_ENDPOINT_DEADLINE, DEFAULT_TARGET_LENGTH,
};
pub use endpoint::{BoxFuture, EndpointError, HttpEndpoint, SystemEndpoint};
pub use error::AppError;
pub use logstore::LogStore;
pub use snapshot::{HttpSink, SinkError, SnapshotSink};
