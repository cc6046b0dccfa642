//! Feedback metrics over the immutable event and outcome logs.
//!
//! Every number here is a pure function of the log slices passed in, so
//! recomputation is idempotent and two apps' logs can be merged by count
//! addition (ratios are recomputed from merged counts).
//!
//! Attribution rules:
//! - An impression counts toward its `arm`. Fallback impressions count
//!   only in the `fallbacks` column; their clicks, votes, and outcomes are
//!   discarded so baseline-served content never colors an arm's quality.
//! - CTR is panel-level: `clicks` counts impressions that received at
//!   least one click, keeping the ratio within [0, 1].
//! - A clicked visit is one distinct (impression, doc) click; it bounces
//!   when the session's next record is a page leave within the dwell
//!   threshold, or when the session shows no further record at all.
//! - Votes deduplicate by (session, doc); the latest vote wins.
//! - The latest outcome record per impression is authoritative.

use crate::log::{EventLogRecord, OutcomeRecord};
use crate::model::{DocId, EventKind, ImpressionId, Outcome, SessionId, SystemId, TimestampMs};
use crate::interleave::preference_score;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use thiserror::Error;

/// Dwell threshold separating a bounce from an engaged visit.
pub const DEFAULT_DWELL_THRESHOLD_MS: i64 = 10_000;

/// Normal-approximation z for the 95% binomial interval.
const WILSON_Z: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsOptions {
    pub dwell_threshold_ms: i64,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self {
            dwell_threshold_ms: DEFAULT_DWELL_THRESHOLD_MS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("cannot merge scorecards for {0} and {1}")]
    SystemMismatch(SystemId, SystemId),
}

/// Closed interval estimate for a binomial proportion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// Wilson score interval for `successes` out of `n` at 95% confidence.
pub fn wilson_interval(successes: u64, n: u64) -> Option<Interval> {
    if n == 0 {
        return None;
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = (WILSON_Z / denom) * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    Some(Interval {
        lo: (center - half).max(0.0),
        hi: (center + half).min(1.0),
    })
}

/// Aggregated standing of one system. Counts are raw; ratios derive from
/// them and are recomputed whenever counts change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemScorecard {
    pub system_id: SystemId,
    /// Panels served on behalf of this arm, fallbacks excluded.
    pub impressions: u64,
    /// Panels where the arm failed and the baseline answered instead.
    pub fallbacks: u64,
    /// Impressions that received at least one click.
    pub clicks: u64,
    pub ctr: Option<f64>,
    /// Distinct (impression, doc) clicks, the bounce-rate denominator.
    pub clicked_visits: u64,
    pub bounces: u64,
    pub bounce_rate: Option<f64>,
    pub votes_up: u64,
    pub votes_down: u64,
    pub wins: u64,
    pub losses: u64,
    pub ties: u64,
    pub preference_score: f64,
    /// 95% Wilson interval over wins/(wins+losses); reporting only.
    pub preference_interval: Option<Interval>,
}

impl SystemScorecard {
    pub fn zero(system_id: SystemId) -> Self {
        Self {
            system_id,
            impressions: 0,
            fallbacks: 0,
            clicks: 0,
            ctr: None,
            clicked_visits: 0,
            bounces: 0,
            bounce_rate: None,
            votes_up: 0,
            votes_down: 0,
            wins: 0,
            losses: 0,
            ties: 0,
            preference_score: 0.5,
            preference_interval: None,
        }
    }

    pub fn votes_net(&self) -> i64 {
        self.votes_up as i64 - self.votes_down as i64
    }

    fn recompute_ratios(&mut self) {
        self.ctr = if self.impressions > 0 {
            Some(self.clicks as f64 / self.impressions as f64)
        } else {
            None
        };
        self.bounce_rate = if self.clicked_visits > 0 {
            Some(self.bounces as f64 / self.clicked_visits as f64)
        } else {
            None
        };
        self.preference_score = preference_score(self.wins, self.losses);
        self.preference_interval = wilson_interval(self.wins, self.wins + self.losses);
    }

    /// Element-wise sum with ratios recomputed; valid when the two cards
    /// cover session-disjoint logs.
    pub fn merged(&self, other: &Self) -> Result<Self, MetricsError> {
        if self.system_id != other.system_id {
            return Err(MetricsError::SystemMismatch(
                self.system_id.clone(),
                other.system_id.clone(),
            ));
        }
        let mut out = Self {
            system_id: self.system_id.clone(),
            impressions: self.impressions + other.impressions,
            fallbacks: self.fallbacks + other.fallbacks,
            clicks: self.clicks + other.clicks,
            ctr: None,
            clicked_visits: self.clicked_visits + other.clicked_visits,
            bounces: self.bounces + other.bounces,
            bounce_rate: None,
            votes_up: self.votes_up + other.votes_up,
            votes_down: self.votes_down + other.votes_down,
            wins: self.wins + other.wins,
            losses: self.losses + other.losses,
            ties: self.ties + other.ties,
            preference_score: 0.5,
            preference_interval: None,
        };
        out.recompute_ratios();
        Ok(out)
    }
}

struct ImpressionInfo {
    arm: SystemId,
    fallback: bool,
}

/// Builds one scorecard per system in `systems`, plus one for any arm the
/// log mentions that the caller did not list. Deterministic given inputs.
pub fn build_scorecards(
    events: &[EventLogRecord],
    outcomes: &[OutcomeRecord],
    systems: &[SystemId],
    opts: &MetricsOptions,
) -> BTreeMap<SystemId, SystemScorecard> {
    let mut cards: BTreeMap<SystemId, SystemScorecard> = systems
        .iter()
        .map(|s| (s.clone(), SystemScorecard::zero(s.clone())))
        .collect();
    let card = |cards: &mut BTreeMap<SystemId, SystemScorecard>, sys: &SystemId| {
        cards
            .entry(sys.clone())
            .or_insert_with(|| SystemScorecard::zero(sys.clone()));
    };

    // Impression index and per-session timelines, in one pass. Timeline
    // order is (timestamp, log position), so unsorted input still yields a
    // deterministic replay.
    let mut impressions: HashMap<&ImpressionId, ImpressionInfo> = HashMap::new();
    let mut sessions: HashMap<&SessionId, Vec<usize>> = HashMap::new();
    for (idx, record) in events.iter().enumerate() {
        sessions.entry(record.session_id()).or_default().push(idx);
        if let EventLogRecord::Impression(imp) = record {
            card(&mut cards, &imp.arm);
            impressions.insert(
                &imp.impression_id,
                ImpressionInfo {
                    arm: imp.arm.clone(),
                    fallback: imp.fallback,
                },
            );
            let entry = cards.get_mut(&imp.arm).expect("card inserted above");
            if imp.fallback {
                entry.fallbacks += 1;
            } else {
                entry.impressions += 1;
            }
        }
    }
    for session in sessions.values_mut() {
        session.sort_by_key(|&idx| (events[idx].at(), idx));
    }

    // Attributable clicks: reference a known, non-fallback impression.
    let attributed = |ev: &crate::model::FeedbackEvent| -> Option<&SystemId> {
        impressions
            .get(&ev.impression_id)
            .filter(|info| !info.fallback)
            .map(|info| &info.arm)
    };

    let mut clicked_panels: HashSet<&ImpressionId> = HashSet::new();
    // Last vote per (session, doc): (timestamp, log index, arm, kind).
    let mut votes: HashMap<(&SessionId, &DocId), (TimestampMs, usize, SystemId, EventKind)> =
        HashMap::new();
    for (idx, record) in events.iter().enumerate() {
        let EventLogRecord::Feedback(ev) = record else {
            continue;
        };
        let Some(arm) = attributed(ev) else {
            continue;
        };
        match ev.kind {
            EventKind::Click => {
                if clicked_panels.insert(&ev.impression_id) {
                    let entry = cards.get_mut(arm).expect("arm card exists");
                    entry.clicks += 1;
                }
            }
            EventKind::VoteUp | EventKind::VoteDown => {
                let doc = ev.doc.as_ref().expect("validated votes carry a doc");
                let key = (&ev.session_id, doc);
                let value = (ev.at, idx, arm.clone(), ev.kind);
                match votes.get(&key) {
                    Some((at, prior_idx, _, _)) if (*at, *prior_idx) > (ev.at, idx) => {}
                    _ => {
                        votes.insert(key, value);
                    }
                }
            }
            EventKind::Impression | EventKind::PageLeave => {}
        }
    }
    for (_, _, arm, kind) in votes.into_values() {
        let entry = cards.get_mut(&arm).expect("arm card exists");
        match kind {
            EventKind::VoteUp => entry.votes_up += 1,
            EventKind::VoteDown => entry.votes_down += 1,
            _ => unreachable!("only votes are stored"),
        }
    }

    // Clicked visits and bounces, replaying each session's timeline.
    for timeline in sessions.values() {
        let mut visited: HashSet<(&ImpressionId, &DocId)> = HashSet::new();
        for (pos, &idx) in timeline.iter().enumerate() {
            let EventLogRecord::Feedback(ev) = &events[idx] else {
                continue;
            };
            if ev.kind != EventKind::Click {
                continue;
            }
            let Some(arm) = attributed(ev) else {
                continue;
            };
            let doc = ev.doc.as_ref().expect("validated clicks carry a doc");
            if !visited.insert((&ev.impression_id, doc)) {
                continue;
            }
            let bounced = match timeline.get(pos + 1) {
                None => true,
                Some(&next_idx) => {
                    let next = &events[next_idx];
                    let within =
                        next.at().millis() - ev.at.millis() <= opts.dwell_threshold_ms;
                    within
                        && matches!(
                            next,
                            EventLogRecord::Feedback(f) if f.kind == EventKind::PageLeave
                        )
                }
            };
            let entry = cards.get_mut(arm).expect("arm card exists");
            entry.clicked_visits += 1;
            if bounced {
                entry.bounces += 1;
            }
        }
    }

    // Latest outcome per impression wins; fallback impressions never tally.
    let mut final_outcomes: HashMap<&ImpressionId, (usize, &OutcomeRecord)> = HashMap::new();
    for (idx, rec) in outcomes.iter().enumerate() {
        final_outcomes.insert(&rec.impression_id, (idx, rec));
    }
    for (_, rec) in final_outcomes.into_values() {
        if impressions
            .get(&rec.impression_id)
            .is_some_and(|info| info.fallback)
        {
            continue;
        }
        card(&mut cards, &rec.experimental);
        let entry = cards.get_mut(&rec.experimental).expect("card inserted above");
        match rec.outcome {
            Outcome::WinExperimental => entry.wins += 1,
            Outcome::WinBaseline => entry.losses += 1,
            Outcome::Tie => entry.ties += 1,
        }
    }

    for entry in cards.values_mut() {
        entry.recompute_ratios();
    }
    cards
}

/// Latest timestamp across both logs, the report's freshness marker.
pub fn freshness(events: &[EventLogRecord], outcomes: &[OutcomeRecord]) -> Option<TimestampMs> {
    let ev = events.iter().map(|r| r.at()).max();
    let oc = outcomes.iter().map(|r| r.at).max();
    ev.max(oc)
}
