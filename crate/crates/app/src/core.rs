//! The serving core: arm selection, panel construction, feedback intake.
//!
//! Everything here is transport-free. The HTTP layer and the in-process
//! simulation harness both drive this type, so wire mode and in-process
//! mode exercise identical serving logic.

use crate::endpoint::{EndpointError, SystemEndpoint};
use crate::error::AppError;
use crate::logstore::LogStore;
use livelab_core::assign::{assign_session, clamp_k, ExperimentConfig};
use livelab_core::interleave::{coins_for_impression, credit, team_draft_interleave};
use livelab_core::log::{EventLogRecord, ImpressionRecord, OutcomeRecord, Segment, Serving};
use livelab_core::model::{
    AppId, ContextId, DocId, EventKind, FeedbackEvent, ImpressionId, QueryId, Ranking, SeedId,
    SessionId, SystemId, Task, TimestampMs,
};
use livelab_core::run::{query_text_index, CandidateList, RunSet};
use livelab_core::wire::{AckStatus, FeedbackAck, RankingPayload, RecommendationPayload};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

/// Default deadline for experimental endpoint calls.
pub const DEFAULT_ENDPOINT_DEADLINE: Duration = Duration::from_millis(800);
/// Default interleaved list length.
pub const DEFAULT_TARGET_LENGTH: usize = 10;

/// Where a system's answers come from.
pub enum SystemSource {
    /// Precomputed rankings uploaded as a run file.
    Run(RunSet),
    /// A live HTTP(-like) endpoint queried per request.
    Endpoint(Arc<dyn SystemEndpoint>),
    /// The built-in production baseline: serves each context's candidate
    /// list in its curated order.
    CandidateOrder,
}

impl fmt::Debug for SystemSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemSource::Run(rs) => write!(f, "Run({} queries)", rs.rankings.len()),
            SystemSource::Endpoint(_) => f.write_str("Endpoint"),
            SystemSource::CandidateOrder => f.write_str("CandidateOrder"),
        }
    }
}

/// Ranking-lane configuration: the baseline plus the experimental rotation.
#[derive(Debug, Clone)]
pub struct AdhocLane {
    pub baseline: SystemId,
    /// Experimental arms served round-robin; may be empty (baseline only).
    pub arms: Vec<SystemId>,
}

/// Recommendation-lane configuration. `cfg.arms` is the full traffic split
/// (the baseline is itself an arm when it should receive traffic);
/// `baseline` is the fallback target when an assigned arm cannot answer.
#[derive(Debug, Clone)]
pub struct RecLane {
    pub cfg: ExperimentConfig,
    pub baseline: SystemId,
}

/// Everything the serving core needs, assembled by config loading or
/// directly by tests.
pub struct AppSetup {
    pub app_id: AppId,
    pub sources: HashMap<SystemId, SystemSource>,
    pub adhoc: Option<AdhocLane>,
    pub recommendation: Option<RecLane>,
    pub candidates: BTreeMap<ContextId, CandidateList>,
    pub queries: BTreeMap<QueryId, String>,
    pub endpoint_deadline: Duration,
    pub target_length: usize,
    pub logs: LogStore,
}

/// A parsed public ranking request.
#[derive(Debug, Clone)]
pub struct RankingRequest {
    pub session_id: SessionId,
    pub query_id: Option<QueryId>,
    pub query_text: Option<String>,
    pub page_size: Option<usize>,
    /// Logical clock override; wall time when absent.
    pub at: Option<TimestampMs>,
}

/// A parsed public recommendation request.
#[derive(Debug, Clone)]
pub struct RecommendationRequest {
    pub session_id: SessionId,
    pub item_id: SeedId,
    pub k: Option<usize>,
    pub at: Option<TimestampMs>,
}

/// Why an arm could not produce a servable list. Converted into fallback
/// or skip at the call site; never surfaced to the end user.
#[derive(Debug)]
enum ResolveFailure {
    UnknownSystem,
    NotCovered,
    Endpoint(EndpointError),
    Invalid(String),
}

impl fmt::Display for ResolveFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResolveFailure::UnknownSystem => f.write_str("system has no configured source"),
            ResolveFailure::NotCovered => f.write_str("context not covered by this system"),
            ResolveFailure::Endpoint(e) => write!(f, "endpoint: {e}"),
            ResolveFailure::Invalid(msg) => write!(f, "invalid response: {msg}"),
        }
    }
}

/// Credit state for one live interleaved impression.
struct LiveImpression {
    session_id: SessionId,
    fallback: bool,
    /// Labeled drafting result; `None` for panels and fallbacks, which
    /// carry no inter-team credit.
    interleaved: Option<livelab_core::interleave::InterleavedImpression>,
    experimental: Option<SystemId>,
    docs: HashSet<DocId>,
    clicks: HashSet<DocId>,
}

struct LiveState {
    impressions: HashMap<ImpressionId, LiveImpression>,
    seen_events: HashSet<livelab_core::model::EventId>,
    session_clock: HashMap<SessionId, TimestampMs>,
}

/// The app's serving state machine.
pub struct AppCore {
    app_id: AppId,
    sources: HashMap<SystemId, SystemSource>,
    adhoc: Option<AdhocLane>,
    recommendation: Option<RecLane>,
    candidates: BTreeMap<ContextId, CandidateList>,
    queries: BTreeMap<QueryId, String>,
    text_index: HashMap<String, QueryId>,
    endpoint_deadline: Duration,
    target_length: usize,
    logs: LogStore,
    rotation: AtomicUsize,
    impression_seq: AtomicU64,
    live: Mutex<LiveState>,
    /// A cut segment awaiting delivery confirmation. Kept so a failed ship
    /// is retried with the same sequence number instead of being dropped.
    in_flight: Mutex<Option<Segment>>,
}

impl AppCore {
    pub fn new(setup: AppSetup) -> Result<Self, AppError> {
        if let Some(lane) = &setup.adhoc {
            for sys in std::iter::once(&lane.baseline).chain(&lane.arms) {
                if !setup.sources.contains_key(sys) {
                    return Err(AppError::BadRequest(format!(
                        "ranking lane references {sys} which has no source"
                    )));
                }
            }
        }
        if let Some(lane) = &setup.recommendation {
            lane.cfg
                .validate()
                .map_err(|e| AppError::BadRequest(e.to_string()))?;
            for sys in std::iter::once(&lane.baseline).chain(&lane.cfg.arms) {
                if !setup.sources.contains_key(sys) {
                    return Err(AppError::BadRequest(format!(
                        "recommendation lane references {sys} which has no source"
                    )));
                }
            }
        }
        let text_index = query_text_index(&setup.queries);
        Ok(Self {
            app_id: setup.app_id,
            sources: setup.sources,
            adhoc: setup.adhoc,
            recommendation: setup.recommendation,
            candidates: setup.candidates,
            queries: setup.queries,
            text_index,
            endpoint_deadline: setup.endpoint_deadline,
            target_length: setup.target_length,
            logs: setup.logs,
            rotation: AtomicUsize::new(0),
            impression_seq: AtomicU64::new(0),
            live: Mutex::new(LiveState {
                impressions: HashMap::new(),
                seen_events: HashSet::new(),
                session_clock: HashMap::new(),
            }),
            in_flight: Mutex::new(None),
        })
    }

    pub fn app_id(&self) -> &AppId {
        &self.app_id
    }

    fn next_impression_id(&self) -> ImpressionId {
        let n = self.impression_seq.fetch_add(1, Ordering::Relaxed) + 1;
        ImpressionId::new(format!("imp-{}-{n:08}", self.app_id.as_str()))
            .expect("impression ids are valid tokens by construction")
    }

    fn now(&self, at: Option<TimestampMs>) -> TimestampMs {
        at.unwrap_or_else(|| {
            let ms = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_millis() as i64)
                .unwrap_or(0);
            TimestampMs(ms)
        })
    }

    /// Produces `system`'s list for one context, within the endpoint
    /// deadline when the system is remote.
    async fn resolve_list(
        &self,
        system: &SystemId,
        context: &ContextId,
        query_text: &str,
        task: Task,
    ) -> Result<Ranking, ResolveFailure> {
        let source = self
            .sources
            .get(system)
            .ok_or(ResolveFailure::UnknownSystem)?;
        match source {
            SystemSource::Run(rs) => rs
                .ranking_for(context, system)
                .ok_or(ResolveFailure::NotCovered),
            SystemSource::CandidateOrder => {
                let list = self
                    .candidates
                    .get(context)
                    .ok_or(ResolveFailure::NotCovered)?;
                Ranking::new(context.clone(), list.candidates.clone(), system.clone())
                    .map_err(|e| ResolveFailure::Invalid(e.to_string()))
            }
            SystemSource::Endpoint(ep) => {
                let fetch = async {
                    match task {
                        Task::Adhoc => ep.fetch_ranking(query_text, context).await,
                        Task::Recommendation => ep.fetch_recommendation(context).await,
                    }
                };
                let items = tokio::time::timeout(self.endpoint_deadline, fetch)
                    .await
                    .map_err(|_| ResolveFailure::Endpoint(EndpointError::Timeout))?
                    .map_err(ResolveFailure::Endpoint)?;
                let ranking = Ranking::new(context.clone(), items, system.clone())
                    .map_err(|e| ResolveFailure::Invalid(e.to_string()))?;
                if let Some(list) = self.candidates.get(context) {
                    if let Some(stray) = ranking.items.iter().find(|d| !list.contains(d)) {
                        return Err(ResolveFailure::Invalid(format!(
                            "{stray} is outside the candidate list"
                        )));
                    }
                }
                Ok(ranking)
            }
        }
    }

    /// Serves one ranking request: interleaves the round-robin experimental
    /// arm with the baseline, or falls back to the bare baseline list when
    /// the arm cannot answer in time.
    pub async fn handle_ranking(
        &self,
        req: RankingRequest,
    ) -> Result<RankingPayload, AppError> {
        let lane = self
            .adhoc
            .as_ref()
            .ok_or_else(|| AppError::BadRequest("ranking lane not configured".into()))?
            .clone();
        let (qid, query_text) = self.resolve_query(&req)?;
        let at = self.now(req.at);
        let target = req
            .page_size
            .unwrap_or(self.target_length)
            .clamp(1, 1000);

        let baseline = self
            .resolve_list(&lane.baseline, &qid, &query_text, Task::Adhoc)
            .await
            .map_err(|e| AppError::NoBaseline(format!("{} for {qid}: {e}", lane.baseline)))?;

        let impression_id = self.next_impression_id();

        // Arm rotation advances only when there is an arm to rotate.
        let arm = if lane.arms.is_empty() {
            None
        } else {
            let slot = self.rotation.fetch_add(1, Ordering::Relaxed);
            Some(lane.arms[slot % lane.arms.len()].clone())
        };

        let mut fallback = false;
        let mut interleaved = None;
        let mut experimental_id = None;
        let serving;
        let arm_label;
        match arm {
            None => {
                arm_label = lane.baseline.clone();
                serving = Serving::Panel {
                    served_by: lane.baseline.clone(),
                    items: baseline.items.iter().take(target).cloned().collect(),
                };
            }
            Some(arm_id) => {
                arm_label = arm_id.clone();
                match self
                    .resolve_list(&arm_id, &qid, &query_text, Task::Adhoc)
                    .await
                {
                    Ok(experimental) => {
                        let merged = team_draft_interleave(
                            impression_id.clone(),
                            &baseline,
                            &experimental,
                            target,
                            coins_for_impression(&impression_id),
                        )
                        .map_err(|e| AppError::BadRequest(e.to_string()))?;
                        serving = Serving::Interleaved {
                            baseline: lane.baseline.clone(),
                            items: merged.items.clone(),
                            coin_trace: merged.coin_trace.clone(),
                        };
                        experimental_id = Some(arm_id);
                        interleaved = Some(merged);
                    }
                    Err(reason) => {
                        tracing::warn!(arm = %arm_id, %qid, %reason, "arm failed; serving baseline");
                        fallback = true;
                        serving = Serving::Panel {
                            served_by: lane.baseline.clone(),
                            items: baseline.items.iter().take(target).cloned().collect(),
                        };
                    }
                }
            }
        }

        let items: Vec<DocId> = serving.docs().into_iter().cloned().collect();
        self.commit_impression(
            ImpressionRecord {
                impression_id: impression_id.clone(),
                session_id: req.session_id.clone(),
                task: Task::Adhoc,
                context: qid.clone(),
                arm: arm_label,
                fallback,
                at,
                serving,
            },
            interleaved,
            experimental_id,
        )?;

        Ok(RankingPayload {
            impression_id,
            query_id: qid,
            items,
        })
    }

    /// Serves one recommendation request under the session-keyed split.
    /// Too few candidates: skip (empty panel, nothing logged). Arm failed:
    /// baseline list attributed to the arm with the fallback flag. Baseline
    /// failed too: skip, the host page must never block.
    pub async fn handle_recommendation(
        &self,
        req: RecommendationRequest,
    ) -> Result<RecommendationPayload, AppError> {
        let lane = self
            .recommendation
            .as_ref()
            .ok_or_else(|| AppError::BadRequest("recommendation lane not configured".into()))?
            .clone();
        let at = self.now(req.at);

        let available = self.candidates.get(&req.item_id).map_or(0, |l| l.len());
        let requested = req.k.unwrap_or(lane.cfg.k_max);
        let Some(k) = clamp_k(requested, available, &lane.cfg) else {
            return Ok(RecommendationPayload::skipped(req.item_id));
        };

        let arm = assign_session(&req.session_id, &lane.cfg).clone();
        let (served_by, items, fallback) = match self
            .resolve_list(&arm, &req.item_id, "", Task::Recommendation)
            .await
        {
            Ok(ranking) if ranking.len() >= lane.cfg.k_min => {
                let take = k.min(ranking.len());
                (arm.clone(), ranking.items[..take].to_vec(), false)
            }
            Ok(short) => {
                tracing::warn!(arm = %arm, item = %req.item_id, got = short.len(),
                    "arm list shorter than k_min; serving baseline");
                match self.baseline_panel(&lane, &req.item_id, k).await {
                    Some(items) => (lane.baseline.clone(), items, true),
                    None => return Ok(RecommendationPayload::skipped(req.item_id)),
                }
            }
            Err(reason) => {
                tracing::warn!(arm = %arm, item = %req.item_id, %reason,
                    "arm failed; serving baseline");
                match self.baseline_panel(&lane, &req.item_id, k).await {
                    Some(items) => (lane.baseline.clone(), items, true),
                    None => return Ok(RecommendationPayload::skipped(req.item_id)),
                }
            }
        };

        // A fallback served by the baseline arm itself is just that arm's
        // own panel.
        let fallback = fallback && arm != lane.baseline;

        let impression_id = self.next_impression_id();
        self.commit_impression(
            ImpressionRecord {
                impression_id: impression_id.clone(),
                session_id: req.session_id.clone(),
                task: Task::Recommendation,
                context: req.item_id.clone(),
                arm,
                fallback,
                at,
                serving: Serving::Panel {
                    served_by,
                    items: items.clone(),
                },
            },
            None,
            None,
        )?;

        Ok(RecommendationPayload {
            impression_id: Some(impression_id),
            item_id: req.item_id,
            items,
        })
    }

    async fn baseline_panel(
        &self,
        lane: &RecLane,
        item_id: &SeedId,
        k: usize,
    ) -> Option<Vec<DocId>> {
        match self
            .resolve_list(&lane.baseline, item_id, "", Task::Recommendation)
            .await
        {
            Ok(ranking) if ranking.len() >= lane.cfg.k_min => {
                let take = k.min(ranking.len());
                Some(ranking.items[..take].to_vec())
            }
            Ok(short) => {
                tracing::warn!(item = %item_id, got = short.len(), "baseline list too short; skipping panel");
                None
            }
            Err(reason) => {
                tracing::warn!(item = %item_id, %reason, "baseline failed; skipping panel");
                None
            }
        }
    }

    /// Records one user feedback event. Repeats of an already-recorded
    /// event id are acknowledged without logging anything.
    pub fn record_feedback(&self, event: FeedbackEvent) -> Result<FeedbackAck, AppError> {
        event
            .validate()
            .map_err(|e| AppError::InvalidEvent(event.event_id.clone(), e.to_string()))?;
        let mut live = self.live.lock().expect("live state lock");

        if live.seen_events.contains(&event.event_id) {
            return Ok(FeedbackAck {
                event_id: event.event_id,
                status: AckStatus::Duplicate,
            });
        }

        let imp = live
            .impressions
            .get(&event.impression_id)
            .ok_or_else(|| AppError::UnknownImpression(event.impression_id.clone()))?;
        if imp.session_id != event.session_id {
            return Err(AppError::InvalidEvent(
                event.event_id.clone(),
                format!(
                    "impression {} belongs to another session",
                    event.impression_id
                ),
            ));
        }
        if let Some(doc) = &event.doc {
            if !imp.docs.contains(doc) {
                return Err(AppError::UnknownClickedDoc(
                    doc.clone(),
                    event.impression_id.clone(),
                ));
            }
        }
        if let Some(pos) = event.position {
            if pos as usize > imp.docs.len() {
                return Err(AppError::InvalidEvent(
                    event.event_id.clone(),
                    format!("position {pos} exceeds panel length {}", imp.docs.len()),
                ));
            }
        }
        if let Some(last) = live.session_clock.get(&event.session_id) {
            if event.at < *last {
                return Err(AppError::NonMonotonicSession(event.session_id.clone()));
            }
        }

        // All checks passed: the event is now authoritative.
        live.seen_events.insert(event.event_id.clone());
        live.session_clock.insert(event.session_id.clone(), event.at);

        let mut new_outcome = None;
        if event.kind == EventKind::Click {
            let imp = live
                .impressions
                .get_mut(&event.impression_id)
                .expect("impression presence checked above");
            let doc = event.doc.clone().expect("validated click carries a doc");
            if imp.clicks.insert(doc) && !imp.fallback {
                if let (Some(merged), Some(experimental)) = (&imp.interleaved, &imp.experimental) {
                    let outcome = credit(merged, &imp.clicks)
                        .map_err(|e| AppError::BadRequest(e.to_string()))?;
                    new_outcome = Some(OutcomeRecord {
                        impression_id: event.impression_id.clone(),
                        experimental: experimental.clone(),
                        outcome,
                        clicked_docs: imp.clicks.len() as u32,
                        at: event.at,
                    });
                }
            }
        }
        drop(live);

        let event_id = event.event_id.clone();
        self.logs.append_event(EventLogRecord::Feedback(event))?;
        if let Some(outcome) = new_outcome {
            self.logs.append_outcome(outcome)?;
        }
        Ok(FeedbackAck {
            event_id,
            status: AckStatus::Recorded,
        })
    }

    /// Cuts everything logged since the previous snapshot into a segment.
    pub fn cut_segment(&self) -> Option<Segment> {
        self.logs.cut_segment(&self.app_id)
    }

    /// Returns the segment to ship next: the unconfirmed in-flight one
    /// when a previous delivery failed, otherwise a freshly cut one. The
    /// segment stays queued until `mark_shipped` confirms it, keeping
    /// sequence numbers contiguous across retries.
    pub fn next_segment(&self) -> Option<Segment> {
        let mut slot = self.in_flight.lock().expect("in-flight lock");
        if slot.is_none() {
            *slot = self.logs.cut_segment(&self.app_id);
        }
        slot.clone()
    }

    /// Confirms delivery of the in-flight segment with this sequence number.
    pub fn mark_shipped(&self, seq: u64) {
        let mut slot = self.in_flight.lock().expect("in-flight lock");
        if slot.as_ref().is_some_and(|s| s.seq == seq) {
            *slot = None;
        }
    }

    pub fn pending_records(&self) -> usize {
        self.logs.pending_records()
    }

    fn resolve_query(&self, req: &RankingRequest) -> Result<(QueryId, String), AppError> {
        if let Some(qid) = &req.query_id {
            let text = req
                .query_text
                .clone()
                .or_else(|| self.queries.get(qid).cloned())
                .unwrap_or_default();
            return Ok((qid.clone(), text));
        }
        if let Some(text) = &req.query_text {
            if let Some(qid) = self.text_index.get(text) {
                return Ok((qid.clone(), text.clone()));
            }
            return Err(AppError::BadRequest(format!(
                "query text {text:?} is not registered; pass a query id"
            )));
        }
        Err(AppError::BadRequest(
            "need query id or query text".to_string(),
        ))
    }

    /// Logs the impression and registers its live credit state. The serving
    /// path writes an initial tie outcome for interleaved impressions so
    /// click-free traffic still reaches the aggregate as a tie.
    fn commit_impression(
        &self,
        record: ImpressionRecord,
        interleaved: Option<livelab_core::interleave::InterleavedImpression>,
        experimental: Option<SystemId>,
    ) -> Result<(), AppError> {
        let docs: HashSet<DocId> = record.serving.docs().into_iter().cloned().collect();
        let initial_outcome = match (&interleaved, &experimental) {
            (Some(_), Some(exp)) if !record.fallback => Some(OutcomeRecord {
                impression_id: record.impression_id.clone(),
                experimental: exp.clone(),
                outcome: livelab_core::model::Outcome::Tie,
                clicked_docs: 0,
                at: record.at,
            }),
            _ => None,
        };

        {
            let mut live = self.live.lock().expect("live state lock");
            live.session_clock
                .entry(record.session_id.clone())
                .and_modify(|t| *t = (*t).max(record.at))
                .or_insert(record.at);
            live.impressions.insert(
                record.impression_id.clone(),
                LiveImpression {
                    session_id: record.session_id.clone(),
                    fallback: record.fallback,
                    interleaved,
                    experimental,
                    docs,
                    clicks: HashSet::new(),
                },
            );
        }

        self.logs
            .append_event(EventLogRecord::Impression(record))?;
        if let Some(outcome) = initial_outcome {
            self.logs.append_outcome(outcome)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::endpoint::BoxFuture;

    fn sid(s: &str) -> SessionId {
        SessionId::new(s).unwrap()
    }

    fn sys(s: &str) -> SystemId {
        SystemId::new(s).unwrap()
    }

    fn docs(names: &[&str]) -> Vec<DocId> {
        names.iter().map(|n| DocId::new(*n).unwrap()).collect()
    }

    fn candidates(pairs: &[(&str, &[&str])]) -> BTreeMap<ContextId, CandidateList> {
        pairs
            .iter()
            .map(|(ctx, ds)| {
                let context = ContextId::new(*ctx).unwrap();
                (
                    context.clone(),
                    CandidateList {
                        context,
                        candidates: docs(ds),
                    },
                )
            })
            .collect()
    }

    /// Endpoint stub answering with a fixed list after an optional delay.
    struct StubEndpoint {
        items: Vec<DocId>,
        delay: Duration,
    }

    impl StubEndpoint {
        fn new(items: Vec<DocId>) -> Self {
            Self {
                items,
                delay: Duration::ZERO,
            }
        }

        fn slow(items: Vec<DocId>, delay: Duration) -> Self {
            Self { items, delay }
        }
    }

    impl SystemEndpoint for StubEndpoint {
        fn fetch_ranking<'a>(
            &'a self,
            _query_text: &'a str,
            _qid: &'a QueryId,
        ) -> BoxFuture<'a, Result<Vec<DocId>, EndpointError>> {
            Box::pin(async move {
                tokio::time::sleep(self.delay).await;
                Ok(self.items.clone())
            })
        }

        fn fetch_recommendation<'a>(
            &'a self,
            _item_id: &'a SeedId,
        ) -> BoxFuture<'a, Result<Vec<DocId>, EndpointError>> {
            Box::pin(async move {
                tokio::time::sleep(self.delay).await;
                Ok(self.items.clone())
            })
        }

        fn liveness<'a>(&'a self) -> BoxFuture<'a, Result<(), EndpointError>> {
            Box::pin(async { Ok(()) })
        }
    }

    fn adhoc_core(arm_source: SystemSource) -> AppCore {
        let mut sources = HashMap::new();
        sources.insert(sys("base"), SystemSource::CandidateOrder);
        sources.insert(sys("exp"), arm_source);
        AppCore::new(AppSetup {
            app_id: AppId::new("app1").unwrap(),
            sources,
            adhoc: Some(AdhocLane {
                baseline: sys("base"),
                arms: vec![sys("exp")],
            }),
            recommendation: None,
            candidates: candidates(&[("q1", &["d1", "d2", "d3", "d4", "d5", "d6"])]),
            queries: [(QueryId::new("q1").unwrap(), "test query".to_string())].into(),
            endpoint_deadline: DEFAULT_ENDPOINT_DEADLINE,
            target_length: 6,
            logs: LogStore::in_memory(),
        })
        .unwrap()
    }

    fn ranking_req(session: &str) -> RankingRequest {
        RankingRequest {
            session_id: sid(session),
            query_id: Some(QueryId::new("q1").unwrap()),
            query_text: None,
            page_size: None,
            at: Some(TimestampMs(1_000)),
        }
    }

    fn click(imp: &ImpressionId, doc: &DocId, n: u32, at: i64) -> FeedbackEvent {
        FeedbackEvent {
            event_id: livelab_core::model::EventId::new(format!("ev{n}")).unwrap(),
            session_id: sid("s1"),
            impression_id: imp.clone(),
            kind: EventKind::Click,
            position: Some(1),
            doc: Some(doc.clone()),
            at: TimestampMs(at),
        }
    }

    #[tokio::test]
    async fn interleaved_serving_logs_initial_tie() {
        let core = adhoc_core(SystemSource::Endpoint(Arc::new(StubEndpoint::new(docs(&[
            "d6", "d5", "d4",
        ])))));
        let payload = core.handle_ranking(ranking_req("s1")).await.unwrap();
        assert!(!payload.items.is_empty());

        let seg = core.cut_segment().unwrap();
        assert_eq!(seg.events.len(), 1);
        assert_eq!(seg.outcomes.len(), 1);
        assert_eq!(
            seg.outcomes[0].outcome,
            livelab_core::model::Outcome::Tie
        );
        match &seg.events[0] {
            EventLogRecord::Impression(imp) => {
                assert!(!imp.fallback);
                assert!(matches!(imp.serving, Serving::Interleaved { .. }));
            }
            other => panic!("expected impression, got {other:?}"),
        }
    }

    #[tokio::test(start_paused = true)]
    async fn slow_arm_falls_back_to_baseline() {
        let core = adhoc_core(SystemSource::Endpoint(Arc::new(StubEndpoint::slow(
            docs(&["d6", "d5"]),
            Duration::from_millis(810),
        ))));
        let payload = core.handle_ranking(ranking_req("s1")).await.unwrap();
        // Candidate order is the baseline, so fallback shows it verbatim.
        assert_eq!(payload.items, docs(&["d1", "d2", "d3", "d4", "d5", "d6"]));

        let seg = core.cut_segment().unwrap();
        assert!(seg.outcomes.is_empty(), "fallbacks must not produce credit");
        match &seg.events[0] {
            EventLogRecord::Impression(imp) => {
                assert!(imp.fallback);
                assert_eq!(imp.arm, sys("exp"));
                assert!(matches!(imp.serving, Serving::Panel { .. }));
            }
            other => panic!("expected impression, got {other:?}"),
        }
    }

    #[tokio::test(start_paused = true)]
    async fn arm_just_under_the_deadline_is_accepted() {
        let core = adhoc_core(SystemSource::Endpoint(Arc::new(StubEndpoint::slow(
            docs(&["d6", "d5", "d4", "d3", "d2", "d1"]),
            Duration::from_millis(790),
        ))));
        let payload = core.handle_ranking(ranking_req("s1")).await.unwrap();
        assert_eq!(payload.items.len(), 6);
        let seg = core.cut_segment().unwrap();
        match &seg.events[0] {
            EventLogRecord::Impression(imp) => assert!(!imp.fallback),
            other => panic!("expected impression, got {other:?}"),
        }
    }

    #[tokio::test]
    async fn endpoint_response_outside_candidates_is_rejected() {
        let core = adhoc_core(SystemSource::Endpoint(Arc::new(StubEndpoint::new(docs(&[
            "d1", "zz-not-a-candidate",
        ])))));
        core.handle_ranking(ranking_req("s1")).await.unwrap();
        let seg = core.cut_segment().unwrap();
        match &seg.events[0] {
            EventLogRecord::Impression(imp) => assert!(imp.fallback),
            other => panic!("expected impression, got {other:?}"),
        }
    }

    #[tokio::test]
    async fn clicks_rewrite_credit_incrementally() {
        let run = livelab_core::run::parse_run_file(
            "q1 Q0 d6 1 3.0 exp\nq1 Q0 d5 2 2.0 exp\nq1 Q0 d4 3 1.0 exp\n",
        )
        .unwrap();
        let core = adhoc_core(SystemSource::Run(run));
        let payload = core.handle_ranking(ranking_req("s1")).await.unwrap();
        let imp_id = payload.impression_id.clone();
        core.cut_segment();

        // Click a document drafted by the experimental side.
        let seg = core.cut_segment();
        assert!(seg.is_none());
        let exp_doc = payload
            .items
            .iter()
            .find(|d| ["d6", "d5", "d4"].contains(&d.as_str()))
            .unwrap()
            .clone();
        let ack = core
            .record_feedback(click(&imp_id, &exp_doc, 1, 2_000))
            .unwrap();
        assert_eq!(ack.status, AckStatus::Recorded);

        let seg = core.cut_segment().unwrap();
        assert_eq!(seg.outcomes.len(), 1);
        assert!(seg.outcomes[0].clicked_docs >= 1);

        // Re-posting the same event id is acknowledged but not re-logged.
        let ack = core
            .record_feedback(click(&imp_id, &exp_doc, 1, 2_000))
            .unwrap();
        assert_eq!(ack.status, AckStatus::Duplicate);
        assert!(core.cut_segment().is_none());
    }

    #[tokio::test]
    async fn feedback_validation_rejects_bad_references() {
        let core = adhoc_core(SystemSource::CandidateOrder);
        let payload = core.handle_ranking(ranking_req("s1")).await.unwrap();
        let imp_id = payload.impression_id.clone();

        let ghost = ImpressionId::new("imp-ghost").unwrap();
        let err = core
            .record_feedback(click(&ghost, &payload.items[0], 1, 2_000))
            .unwrap_err();
        assert_eq!(err.status_code(), 404);

        let stray = DocId::new("not-served").unwrap();
        let err = core
            .record_feedback(click(&imp_id, &stray, 2, 2_000))
            .unwrap_err();
        assert_eq!(err.status_code(), 400);

        // Session clocks may not run backwards.
        core.record_feedback(click(&imp_id, &payload.items[0], 3, 5_000))
            .unwrap();
        let err = core
            .record_feedback(click(&imp_id, &payload.items[0], 4, 4_000))
            .unwrap_err();
        assert_eq!(err.status_code(), 400);
    }

    #[tokio::test]
    async fn round_robin_rotates_fairly() {
        let run_a = livelab_core::run::parse_run_file("q1 Q0 d1 1 1.0 a\n").unwrap();
        let run_b = livelab_core::run::parse_run_file("q1 Q0 d2 1 1.0 b\n").unwrap();
        let mut sources = HashMap::new();
        sources.insert(sys("base"), SystemSource::CandidateOrder);
        sources.insert(sys("arm-a"), SystemSource::Run(run_a));
        sources.insert(sys("arm-b"), SystemSource::Run(run_b));
        let core = AppCore::new(AppSetup {
            app_id: AppId::new("app1").unwrap(),
            sources,
            adhoc: Some(AdhocLane {
                baseline: sys("base"),
                arms: vec![sys("arm-a"), sys("arm-b")],
            }),
            recommendation: None,
            candidates: candidates(&[("q1", &["d1", "d2", "d3"])]),
            queries: BTreeMap::new(),
            endpoint_deadline: DEFAULT_ENDPOINT_DEADLINE,
            target_length: 3,
            logs: LogStore::in_memory(),
        })
        .unwrap();

        for i in 0..7 {
            core.handle_ranking(ranking_req(&format!("s{i}")))
                .await
                .unwrap();
        }
        let seg = core.cut_segment().unwrap();
        let mut by_arm: HashMap<String, usize> = HashMap::new();
        for ev in &seg.events {
            if let EventLogRecord::Impression(imp) = ev {
                *by_arm.entry(imp.arm.as_str().to_string()).or_default() += 1;
            }
        }
        // 7 impressions over 2 arms: one arm gets 4, the other 3.
        assert_eq!(by_arm["arm-a"], 4);
        assert_eq!(by_arm["arm-b"], 3);
    }

    #[tokio::test]
    async fn baseline_only_when_no_arms() {
        let mut sources = HashMap::new();
        sources.insert(sys("base"), SystemSource::CandidateOrder);
        let core = AppCore::new(AppSetup {
            app_id: AppId::new("app1").unwrap(),
            sources,
            adhoc: Some(AdhocLane {
                baseline: sys("base"),
                arms: vec![],
            }),
            recommendation: None,
            candidates: candidates(&[("q1", &["d1", "d2", "d3"])]),
            queries: BTreeMap::new(),
            endpoint_deadline: DEFAULT_ENDPOINT_DEADLINE,
            target_length: 10,
            logs: LogStore::in_memory(),
        })
        .unwrap();
        let payload = core.handle_ranking(ranking_req("s1")).await.unwrap();
        assert_eq!(payload.items, docs(&["d1", "d2", "d3"]));
        let seg = core.cut_segment().unwrap();
        assert!(seg.outcomes.is_empty());
        match &seg.events[0] {
            EventLogRecord::Impression(imp) => {
                assert!(!imp.fallback);
                assert_eq!(imp.arm, sys("base"));
            }
            other => panic!("expected impression, got {other:?}"),
        }
    }

    fn rec_core(arm_source: SystemSource, pool: &[&str]) -> AppCore {
        let mut sources = HashMap::new();
        sources.insert(sys("rec-base"), SystemSource::CandidateOrder);
        sources.insert(sys("rec-exp"), arm_source);
        let cfg = ExperimentConfig::new(
            "cycle-1",
            Task::Recommendation,
            vec![sys("rec-base"), sys("rec-exp")],
            "salt-1",
        )
        .unwrap();
        AppCore::new(AppSetup {
            app_id: AppId::new("app1").unwrap(),
            sources,
            adhoc: None,
            recommendation: Some(RecLane {
                cfg,
                baseline: sys("rec-base"),
            }),
            candidates: candidates(&[("seed1", pool)]),
            queries: BTreeMap::new(),
            endpoint_deadline: DEFAULT_ENDPOINT_DEADLINE,
            target_length: 10,
            logs: LogStore::in_memory(),
        })
        .unwrap()
    }

    fn rec_req(session: &str, k: Option<usize>) -> RecommendationRequest {
        RecommendationRequest {
            session_id: sid(session),
            item_id: SeedId::new("seed1").unwrap(),
            k,
            at: Some(TimestampMs(1_000)),
        }
    }

    #[tokio::test]
    async fn sparse_pool_skips_without_logging() {
        let core = rec_core(SystemSource::CandidateOrder, &["r1", "r2"]);
        let payload = core.handle_recommendation(rec_req("s1", None)).await.unwrap();
        assert!(payload.is_skipped());
        assert!(core.cut_segment().is_none());
    }

    #[tokio::test]
    async fn panel_size_respects_clamp() {
        let core = rec_core(
            SystemSource::CandidateOrder,
            &["r1", "r2", "r3", "r4", "r5"],
        );
        let payload = core.handle_recommendation(rec_req("s1", Some(50))).await.unwrap();
        assert_eq!(payload.items.len(), 5);
        let payload = core.handle_recommendation(rec_req("s2", Some(1))).await.unwrap();
        assert_eq!(payload.items.len(), 3);
    }

    #[tokio::test]
    async fn same_session_same_arm() {
        let core = rec_core(
            SystemSource::CandidateOrder,
            &["r1", "r2", "r3", "r4", "r5"],
        );
        for _ in 0..3 {
            core.handle_recommendation(rec_req("s-fixed", None))
                .await
                .unwrap();
        }
        let seg = core.cut_segment().unwrap();
        let arms: HashSet<String> = seg
            .events
            .iter()
            .filter_map(|ev| match ev {
                EventLogRecord::Impression(imp) => Some(imp.arm.as_str().to_string()),
                _ => None,
            })
            .collect();
        assert_eq!(arms.len(), 1, "one session must stay on one arm");
    }

    #[tokio::test(start_paused = true)]
    async fn failed_rec_arm_serves_baseline_flagged_as_fallback() {
        let core = rec_core(
            SystemSource::Endpoint(Arc::new(StubEndpoint::slow(
                docs(&["r5", "r4", "r3"]),
                Duration::from_secs(5),
            ))),
            &["r1", "r2", "r3", "r4", "r5"],
        );
        // Find a session the hash sends to the experimental arm.
        let cfg = core.recommendation.as_ref().unwrap().cfg.clone();
        let session = (0..100)
            .map(|i| sid(&format!("s{i}")))
            .find(|s| assign_session(s, &cfg).as_str() == "rec-exp")
            .expect("some session lands on the experimental arm");

        let payload = core
            .handle_recommendation(RecommendationRequest {
                session_id: session,
                item_id: SeedId::new("seed1").unwrap(),
                k: None,
                at: Some(TimestampMs(1_000)),
            })
            .await
            .unwrap();
        assert!(!payload.is_skipped());
        assert_eq!(payload.items, docs(&["r1", "r2", "r3", "r4", "r5"]));

        let seg = core.cut_segment().unwrap();
        match &seg.events[0] {
            EventLogRecord::Impression(imp) => {
                assert!(imp.fallback);
                assert_eq!(imp.arm, sys("rec-exp"));
                match &imp.serving {
                    Serving::Panel { served_by, .. } => assert_eq!(served_by, &sys("rec-base")),
                    other => panic!("expected panel, got {other:?}"),
                }
            }
            other => panic!("expected impression, got {other:?}"),
        }
    }

    #[tokio::test]
    async fn vote_on_rec_panel_is_logged_without_outcome() {
        let core = rec_core(
            SystemSource::CandidateOrder,
            &["r1", "r2", "r3", "r4", "r5"],
        );
        let payload = core.handle_recommendation(rec_req("s1", None)).await.unwrap();
        let imp_id = payload.impression_id.clone().unwrap();
        let vote = FeedbackEvent {
            event_id: livelab_core::model::EventId::new("v1").unwrap(),
            session_id: sid("s1"),
            impression_id: imp_id,
            kind: EventKind::VoteUp,
            position: None,
            doc: Some(payload.items[0].clone()),
            at: TimestampMs(3_000),
        };
        core.record_feedback(vote).unwrap();
        let seg = core.cut_segment().unwrap();
        assert_eq!(seg.events.len(), 2);
        assert!(seg.outcomes.is_empty());
    }
}
