//! Shared domain model and algorithms for a desk-scale living-lab
//! evaluation platform: experimental search and recommendation systems
//! serve real traffic inside a host application, and user feedback decides
//! which system wins.
//!
//! The platform runs two experiment designs:
//!
//! - Ad-hoc ranking: each request merges an experimental ranking with the
//!   production baseline by team drafting ([`interleave`]); clicks credit
//!   the owning team and aggregate into a preference score.
//! - Dataset recommendation: each session is hashed onto exactly one arm
//!   ([`assign`]); panels are scored by click-through rate, bounce rate,
//!   and votes ([`metrics`]).
//!
//! Experimental systems participate either as pre-computed run files
//! ([`run`]) or as live endpoints answering the wire protocol ([`wire`]).
//! Serving apps append everything to a replayable event log ([`log`]) and
//! ship numbered segments to an aggregation server, which folds them into
//! the dashboard report ([`report`]).
//!
//! This crate is IO-light by design: everything here is a pure function
//! over explicit inputs, so the serving app, the aggregation server, and
//! the traffic simulator all compute identical numbers from identical
//! records.

pub mod assign;
pub mod hash;
pub mod interleave;
pub mod log;
pub mod metrics;
pub mod model;
pub mod report;
pub mod run;
pub mod wire;

pub use assign::{assign_session, clamp_k, ExperimentConfig};
pub use interleave::{
    aggregate_preference, coins_for_impression, credit, team_draft_interleave,
    InterleavedImpression, LabeledDoc, PreferenceTally, TeamLabel,
};
pub use log::{EventLogRecord, ImpressionRecord, OutcomeRecord, Segment, Serving};
pub use metrics::{build_scorecards, MetricsOptions, SystemScorecard};
pub use model::{
    AppId, ContextId, DocId, EventId, EventKind, FeedbackEvent, ImpressionId, Outcome, QueryId,
    Ranking, RegistryEntry, SeedId, SessionId, SystemId, SystemKind, SystemRecord, SystemStatus,
    Task, TimestampMs,
};
pub use report::{build_report, DashboardReport, SystemMeta};
pub use run::{parse_run_file, validate_against_candidates, CandidateList, RunSet};
