//! Shared domain types and identifiers.
//!
//! Every identifier is an opaque token: a non-empty string with no whitespace
//! or control characters. Nothing in this module interprets identifier
//! contents; corpora are free to use whatever naming scheme they like.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use thiserror::Error;

/// Errors raised by domain-type constructors and validators.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("empty token")]
    EmptyToken,
    #[error("token {0:?} contains whitespace or control characters")]
    InvalidToken(String),
    #[error("duplicate document {0} in ranking")]
    DuplicateDoc(DocId),
    #[error("ranking has no items")]
    EmptyRanking,
    #[error("system {0}: {1}")]
    InvalidSystemRecord(SystemId, String),
    #[error("event {0}: {1}")]
    InvalidEvent(EventId, String),
    #[error("session {0}: event timestamps decrease")]
    NonMonotonicSession(SessionId),
}

/// Checks the platform-wide token shape: non-empty, no whitespace or
/// control characters. Identifiers, tags, and participant names share it.
pub fn check_token(value: &str) -> Result<(), ModelError> {
    if value.is_empty() {
        return Err(ModelError::EmptyToken);
    }
    if value.chars().any(|c| c.is_whitespace() || c.is_control()) {
        return Err(ModelError::InvalidToken(value.to_string()));
    }
    Ok(())
}

macro_rules! token_id {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            /// Builds the identifier, rejecting empty or non-token strings.
            pub fn new(value: impl Into<String>) -> Result<Self, ModelError> {
                let value = value.into();
                check_token(&value)?;
                Ok(Self(value))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }

            pub fn into_inner(self) -> String {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl TryFrom<String> for $name {
            type Error = ModelError;
            fn try_from(value: String) -> Result<Self, Self::Error> {
                Self::new(value)
            }
        }

        impl std::str::FromStr for $name {
            type Err = ModelError;
            fn from_str(value: &str) -> Result<Self, Self::Err> {
                Self::new(value)
            }
        }

        impl From<$name> for String {
            fn from(value: $name) -> String {
                value.0
            }
        }
    };
}

token_id!(
    /// Identifier of a document or research-data record.
    DocId
);
token_id!(
    /// Identifier of a query or of a seed publication. Ad-hoc search and
    /// recommendation share the same key space mechanics, so one type covers
    /// both roles.
    ContextId
);
token_id!(
    /// Identifier of a registered experimental or baseline system.
    SystemId
);
token_id!(
    /// Identifier of a user session.
    SessionId
);
token_id!(
    /// Identifier of one served result panel.
    ImpressionId
);
token_id!(
    /// Identifier of one feedback event, used for idempotent ingestion.
    EventId
);
token_id!(
    /// Identifier of one site application instance shipping snapshots.
    AppId
);

/// A query identifier in ad-hoc search.
pub type QueryId = ContextId;
/// A seed-publication identifier in dataset recommendation.
pub type SeedId = ContextId;

/// Milliseconds since the Unix epoch, UTC.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TimestampMs(pub i64);

impl TimestampMs {
    pub fn millis(self) -> i64 {
        self.0
    }

    pub fn saturating_add(self, delta_ms: i64) -> Self {
        Self(self.0.saturating_add(delta_ms))
    }
}

impl fmt::Display for TimestampMs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The two evaluation tasks the platform runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Ad-hoc document search, evaluated by interleaving.
    Adhoc,
    /// Research-data recommendation, evaluated by session-split A/B testing.
    Recommendation,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Adhoc => f.write_str("adhoc"),
            Task::Recommendation => f.write_str("recommendation"),
        }
    }
}

/// How a registered system produces its results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    /// Pre-computed result files uploaded ahead of time.
    RunBacked,
    /// A running system reachable over the system-endpoint wire protocol.
    EndpointBacked,
    /// The production-side reference system.
    Baseline,
}

/// Registry entry for an experimental or baseline system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRecord {
    pub system_id: SystemId,
    pub kind: SystemKind,
    pub task: Task,
    /// Base URL of the system endpoint. Required iff `kind` is endpoint-backed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Reference to an uploaded run set. Required iff `kind` is run-backed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_ref: Option<String>,
}

impl SystemRecord {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: &str| {
            Err(ModelError::InvalidSystemRecord(
                self.system_id.clone(),
                msg.to_string(),
            ))
        };
        match self.kind {
            SystemKind::RunBacked => {
                if self.run_ref.is_none() {
                    return fail("run-backed system needs run_ref");
                }
                if self.endpoint.is_some() {
                    return fail("run-backed system must not carry an endpoint");
                }
            }
            SystemKind::EndpointBacked => {
                if self.endpoint.is_none() {
                    return fail("endpoint-backed system needs endpoint");
                }
                if self.run_ref.is_some() {
                    return fail("endpoint-backed system must not carry run_ref");
                }
            }
            // The baseline may be served from a run, an endpoint, or the
            // built-in candidate-order ranker; at most one source.
            SystemKind::Baseline => {
                if self.endpoint.is_some() && self.run_ref.is_some() {
                    return fail("baseline may carry at most one of endpoint/run_ref");
                }
            }
        }
        Ok(())
    }
}

/// Lifecycle stage of a registered system. Stages only move forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemStatus {
    Submitted,
    Validated,
    Live,
    Retired,
}

impl SystemStatus {
    /// Whether moving to `next` respects the forward-only lifecycle.
    pub fn may_transition_to(self, next: SystemStatus) -> bool {
        next > self
    }
}

impl fmt::Display for SystemStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SystemStatus::Submitted => "submitted",
            SystemStatus::Validated => "validated",
            SystemStatus::Live => "live",
            SystemStatus::Retired => "retired",
        };
        f.write_str(s)
    }
}

/// A system as tracked by the registry: the record plus ownership and
/// lifecycle state. This is also the wire shape apps receive when they
/// load the arm set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    #[serde(flatten)]
    pub record: SystemRecord,
    pub participant: String,
    pub status: SystemStatus,
    pub submitted_at: TimestampMs,
}

/// An ordered list of documents produced by one system for one context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    pub context: ContextId,
    pub items: Vec<DocId>,
    pub source: SystemId,
}

impl Ranking {
    pub fn new(
        context: ContextId,
        items: Vec<DocId>,
        source: SystemId,
    ) -> Result<Self, ModelError> {
        let ranking = Self {
            context,
            items,
            source,
        };
        ranking.validate()?;
        Ok(ranking)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        validate_ranking(self)
    }
}

/// Checks the ranking invariants: at least one item, no duplicate documents.
pub fn validate_ranking(ranking: &Ranking) -> Result<(), ModelError> {
    if ranking.items.is_empty() {
        return Err(ModelError::EmptyRanking);
    }
    let mut seen = HashSet::with_capacity(ranking.items.len());
    for doc in &ranking.items {
        if !seen.insert(doc) {
            return Err(ModelError::DuplicateDoc(doc.clone()));
        }
    }
    Ok(())
}

/// One user action tied to a session and a served impression.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub event_id: EventId,
    pub session_id: SessionId,
    pub impression_id: ImpressionId,
    pub kind: EventKind,
    /// 1-based rank of the acted-on item. Required for clicks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<u32>,
    /// Acted-on document. Required for clicks and votes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc: Option<DocId>,
    pub at: TimestampMs,
}

/// The kinds of feedback the platform records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Impression,
    Click,
    VoteUp,
    VoteDown,
    PageLeave,
}

impl EventKind {
    pub fn is_vote(self) -> bool {
        matches!(self, EventKind::VoteUp | EventKind::VoteDown)
    }
}

impl FeedbackEvent {
    /// Field-level validation; membership of `doc`/`position` in the
    /// impression is checked where the impression contents are known.
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: &str| {
            Err(ModelError::InvalidEvent(
                self.event_id.clone(),
                msg.to_string(),
            ))
        };
        match self.kind {
            EventKind::Click => {
                if self.position.is_none() {
                    return fail("click needs a position");
                }
                if self.doc.is_none() {
                    return fail("click needs a doc");
                }
                if self.position == Some(0) {
                    return fail("positions are 1-based");
                }
            }
            EventKind::VoteUp | EventKind::VoteDown => {
                if self.doc.is_none() {
                    return fail("vote needs a doc");
                }
            }
            EventKind::Impression | EventKind::PageLeave => {}
        }
        if let Some(0) = self.position {
            return fail("positions are 1-based");
        }
        Ok(())
    }
}

/// A user session: an ordered run of feedback events under one session id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: SessionId,
    pub started_at: TimestampMs,
    pub events: Vec<FeedbackEvent>,
}

impl Session {
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut last = TimestampMs(i64::MIN);
        for event in &self.events {
            event.validate()?;
            if event.at < last {
                return Err(ModelError::NonMonotonicSession(self.session_id.clone()));
            }
            last = event.at;
        }
        Ok(())
    }
}

/// Per-impression result of interleaved credit assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    WinExperimental,
    WinBaseline,
    Tie,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::WinExperimental => f.write_str("win_experimental"),
            Outcome::WinBaseline => f.write_str("win_baseline"),
            Outcome::Tie => f.write_str("tie"),
        }
    }
}
