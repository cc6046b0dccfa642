//! Central aggregation server.
//!
//! Keeps the registry of experimental systems, validates run uploads
//! against candidate lists, accepts log segments from site apps with
//! exactly-once application, and assembles the evaluation dashboard.

pub mod config;
pub mod core;
pub mod error;
pub mod http;
pub mod registry;
pub mod store;

pub use config::{Participant, ServerConfig};
pub use core::ServerCore;
pub use error::ServerError;
pub use registry::{Registry, RunUploadOutcome, StoredSystem};
pub use store::SegmentStore;
