//! JSON payloads shared across the HTTP seams.
//!
//! Public payloads are blind: they carry document ids only, never team
//! labels or arm identity, so end users (and simulated users) cannot tell
//! which experimental system produced what they see.

use crate::log::Segment;
use crate::model::{AppId, DocId, EventId, ImpressionId, SeedId, SystemStatus};
use crate::model::QueryId;
use serde::{Deserialize, Serialize};

/// Response of the public ranking endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingPayload {
    pub impression_id: ImpressionId,
    pub query_id: QueryId,
    pub items: Vec<DocId>,
}

/// Response of the public recommendation endpoint. A suppressed panel
/// (too few candidates, see the k bounds) has no impression id and an
/// empty item list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommendationPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impression_id: Option<ImpressionId>,
    pub item_id: SeedId,
    pub items: Vec<DocId>,
}

impl RecommendationPayload {
    pub fn skipped(item_id: SeedId) -> Self {
        Self {
            impression_id: None,
            item_id,
            items: Vec::new(),
        }
    }

    pub fn is_skipped(&self) -> bool {
        self.impression_id.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AckStatus {
    Recorded,
    /// The event id was seen before; the original record stands.
    Duplicate,
}

/// Acknowledgement for one posted feedback event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackAck {
    pub event_id: EventId,
    pub status: AckStatus,
}

/// Wire shape experimental system endpoints must answer with: a bare
/// ordered document list under the fixed key `itemlist`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemListResponse {
    pub itemlist: Vec<DocId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotStatus {
    Applied,
    /// Out of order; held until the sequence gap closes.
    Parked,
    Duplicate,
}

/// Acknowledgement for one uploaded log segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotAck {
    pub app_id: AppId,
    pub seq: u64,
    pub status: SnapshotStatus,
    /// Segments folded into aggregation so far, for upload bookkeeping.
    pub applied_through: u64,
}

/// Body of the registry status-transition endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusChange {
    pub status: SystemStatus,
}

/// Uniform error body for non-2xx responses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

impl ErrorBody {
    pub fn new(error: impl Into<String>) -> Self {
        Self {
            error: error.into(),
        }
    }
}

/// Liveness body for `/healthz` and systems' `/test`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthBody {
    pub status: String,
}

impl HealthBody {
    pub fn ok() -> Self {
        Self {
            status: "ok".to_string(),
        }
    }
}

/// One snapshot upload: the segment plus nothing else; auth rides in the
/// HTTP header.
pub type SnapshotUpload = Segment;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn itemlist_uses_the_fixed_key() {
        let response = ItemListResponse {
            itemlist: vec![DocId::new("d1").unwrap(), DocId::new("d2").unwrap()],
        };
        let json = serde_json::to_string(&response).unwrap();
        assert_eq!(json, r#"{"itemlist":["d1","d2"]}"#);
        let back: ItemListResponse = serde_json::from_str(&json).unwrap();
        assert_eq!(back, response);
    }

    #[test]
    fn skipped_panel_has_no_impression() {
        let payload = RecommendationPayload::skipped(SeedId::new("seed1").unwrap());
        assert!(payload.is_skipped());
        let json = serde_json::to_string(&payload).unwrap();
        assert_eq!(json, r#"{"item_id":"seed1","items":[]}"#);
    }

    #[test]
    fn ranking_payload_carries_no_team_information() {
        let payload = RankingPayload {
            impression_id: ImpressionId::new("imp-1").unwrap(),
            query_id: QueryId::new("q1").unwrap(),
            items: vec![DocId::new("d1").unwrap()],
        };
        let json = serde_json::to_string(&payload).unwrap();
        assert!(!json.contains("team"));
        assert!(!json.contains("baseline"));
        assert!(!json.contains("arm"));
    }
}
