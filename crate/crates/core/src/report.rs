//! The aggregated dashboard report.
//!
//! The report is a pure function of (event log, outcome log, registry
//! view): identical inputs serialize to identical bytes, which is what
//! makes campaign reruns comparable. Freshness comes from the newest
//! record timestamp, never from the wall clock.

use crate::log::{EventLogRecord, OutcomeRecord};
use crate::metrics::{build_scorecards, freshness, MetricsOptions, SystemScorecard};
use crate::model::{RegistryEntry, SystemId, Task};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Registry context echoed into the report so readers can interpret the
/// tables without access to the server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemMeta {
    pub system_id: SystemId,
    pub participant: String,
    pub task: Task,
    pub kind: crate::model::SystemKind,
    pub status: crate::model::SystemStatus,
}

impl From<&RegistryEntry> for SystemMeta {
    fn from(entry: &RegistryEntry) -> Self {
        Self {
            system_id: entry.record.system_id.clone(),
            participant: entry.participant.clone(),
            task: entry.record.task,
            kind: entry.record.kind,
            status: entry.status,
        }
    }
}

/// The dashboard document, serialized as JSON and rendered as text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DashboardReport {
    /// Newest record timestamp across both logs; absent before any traffic.
    pub as_of_ms: Option<i64>,
    /// Snapshot segments folded into this report.
    pub segments_applied: u64,
    /// Registered systems, sorted by id.
    pub systems: Vec<SystemMeta>,
    /// Ranking-task table, best preference score first.
    pub adhoc: Vec<SystemScorecard>,
    /// Recommendation-task table, best click-through rate first.
    pub recommendation: Vec<SystemScorecard>,
}

/// Builds the report from log slices and the registry view.
pub fn build_report(
    events: &[EventLogRecord],
    outcomes: &[OutcomeRecord],
    registry: &[SystemMeta],
    segments_applied: u64,
    opts: &MetricsOptions,
) -> DashboardReport {
    let mut systems = registry.to_vec();
    systems.sort_by(|a, b| a.system_id.cmp(&b.system_id));

    let ids: Vec<SystemId> = systems.iter().map(|m| m.system_id.clone()).collect();
    let mut cards = build_scorecards(events, outcomes, &ids, opts);

    let mut table = |task: Task| -> Vec<SystemScorecard> {
        let mut rows: Vec<SystemScorecard> = systems
            .iter()
            .filter(|m| m.task == task)
            .filter_map(|m| cards.remove(&m.system_id))
            .collect();
        match task {
            Task::Adhoc => rows.sort_by(|a, b| {
                b.preference_score
                    .total_cmp(&a.preference_score)
                    .then_with(|| a.system_id.cmp(&b.system_id))
            }),
            Task::Recommendation => rows.sort_by(|a, b| {
                let key = |c: &SystemScorecard| c.ctr.unwrap_or(f64::NEG_INFINITY);
                key(b)
                    .total_cmp(&key(a))
                    .then_with(|| a.system_id.cmp(&b.system_id))
            }),
        }
        rows
    };
    let adhoc = table(Task::Adhoc);
    let recommendation = table(Task::Recommendation);

    DashboardReport {
        as_of_ms: freshness(events, outcomes).map(|t| t.millis()),
        segments_applied,
        systems,
        adhoc,
        recommendation,
    }
}

impl DashboardReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text rendering for `report.txt` and the CLI.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "evaluation dashboard");
        match self.as_of_ms {
            Some(ms) => {
                let _ = writeln!(out, "data as of (ms since epoch): {ms}");
            }
            None => {
                let _ = writeln!(out, "no traffic recorded yet");
            }
        }
        let _ = writeln!(out, "segments applied: {}", self.segments_applied);

        let _ = writeln!(out, "\nregistered systems");
        if self.systems.is_empty() {
            let _ = writeln!(out, "  (none)");
        }
        for m in &self.systems {
            let _ = writeln!(
                out,
                "  {} task={} kind={:?} status={} participant={}",
                m.system_id, m.task, m.kind, m.status, m.participant
            );
        }

        let fmt_ratio = |v: Option<f64>| match v {
            Some(v) => format!("{v:.3}"),
            None => "-".to_string(),
        };

        let _ = writeln!(out, "\nad-hoc ranking (preference vs baseline)");
        let _ = writeln!(
            out,
            "  {:<20} {:>6} {:>6} {:>6} {:>6} {:>15} {:>11} {:>9} {:>6}",
            "system", "wins", "losses", "ties", "pref", "95% interval", "impressions", "fallbacks", "ctr"
        );
        for c in &self.adhoc {
            let interval = match &c.preference_interval {
                Some(i) => format!("[{:.3},{:.3}]", i.lo, i.hi),
                None => "-".to_string(),
            };
            let _ = writeln!(
                out,
                "  {:<20} {:>6} {:>6} {:>6} {:>6.3} {:>15} {:>11} {:>9} {:>6}",
                c.system_id.as_str(),
                c.wins,
                c.losses,
                c.ties,
                c.preference_score,
                interval,
                c.impressions,
                c.fallbacks,
                fmt_ratio(c.ctr),
            );
        }

        let _ = writeln!(out, "\ndataset recommendation (session-split arms)");
        let _ = writeln!(
            out,
            "  {:<20} {:>11} {:>9} {:>6} {:>7} {:>7} {:>5} {:>5}",
            "system", "impressions", "fallbacks", "ctr", "visits", "bounce", "up", "down"
        );
        for c in &self.recommendation {
            let _ = writeln!(
                out,
                "  {:<20} {:>11} {:>9} {:>6} {:>7} {:>7} {:>5} {:>5}",
                c.system_id.as_str(),
                c.impressions,
                c.fallbacks,
                fmt_ratio(c.ctr),
                c.clicked_visits,
                fmt_ratio(c.bounce_rate),
                c.votes_up,
                c.votes_down,
            );
        }
        out
    }
}
