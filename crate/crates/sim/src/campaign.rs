//! Scripted evaluation campaigns against the living-lab platform.
//!
//! A [`Scenario`] pins everything that can influence the outcome: the
//! synthetic world, the participating systems, the click model, and one
//! seed. Driving the same scenario twice therefore produces the same
//! requests, the same feedback, and the same final dashboard, which is what
//! the reproducibility checks assert.
//!
//! Session timeline. Sessions run sequentially on a logical millisecond
//! clock; session `n` owns the window starting at `n * 1_000_000`. The
//! ranking interaction uses the first half of the window and the
//! recommendation interaction the second, so every event a session emits
//! is strictly later than the one before it. Click `i` of a panel lands at
//! `phase + (i + 1) * 20_000`; its follow-up lands 2 s later for a bounce
//! (inside the default 10 s dwell threshold) and 15 or 16 s later for an
//! engaged visit (outside it).

use crate::click::{BehaviorSpec, ClickModel};
use crate::client::{DriveError, Platform};
use crate::policy::Policy;
use crate::stub::{spawn_stub_system, FaultSpec, PolicyEndpoint};
use crate::world::{World, WorldSpec};
use anyhow::Context;
use livelab_app::{
    AdhocLane, AppCore, AppSetup, LogStore, RecLane, SystemSource, DEFAULT_TARGET_LENGTH,
};
use livelab_core::assign::{ExperimentConfig, DEFAULT_K_MAX, DEFAULT_K_MIN};
use livelab_core::hash::fnv1a64_parts;
use livelab_core::log::Segment;
use livelab_core::metrics::MetricsOptions;
use livelab_core::model::{
    AppId, ContextId, EventId, EventKind, FeedbackEvent, SessionId, SystemId, SystemKind,
    SystemRecord, SystemStatus, Task, TimestampMs,
};
use livelab_server::ServerCore;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

/// One participating system: an id, the policy it answers with, and the
/// transport it answers through. Run-backed by default; setting `endpoint`
/// serves the policy live, with optional fault knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemPlan {
    pub system_id: String,
    #[serde(flatten)]
    pub policy: Policy,
    /// Serve through a live endpoint instead of an uploaded run.
    #[serde(default)]
    pub endpoint: bool,
    /// Probability that one endpoint request stalls past the deadline.
    #[serde(default)]
    pub timeout_prob: f64,
    /// Fixed extra latency per endpoint answer, in milliseconds.
    #[serde(default)]
    pub extra_delay_ms: u64,
}

impl SystemPlan {
    fn fault(&self) -> FaultSpec {
        FaultSpec {
            timeout_prob: self.timeout_prob,
            extra_delay_ms: self.extra_delay_ms,
        }
    }
}

/// Ranking lane: which system is the baseline and which rotate against it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdhocPlan {
    pub baseline: String,
    #[serde(default)]
    pub arms: Vec<String>,
}

/// Recommendation lane: the session-split arm set plus the fallback.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecPlan {
    pub experiment_id: String,
    pub salt: String,
    pub baseline: String,
    pub arms: Vec<String>,
    #[serde(default = "default_k_min")]
    pub k_min: usize,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
}

fn default_k_min() -> usize {
    DEFAULT_K_MIN
}

fn default_k_max() -> usize {
    DEFAULT_K_MAX
}

fn default_sessions() -> usize {
    50
}

fn default_deadline_ms() -> u64 {
    800
}

fn default_target_length() -> usize {
    DEFAULT_TARGET_LENGTH
}

fn default_snapshot_every() -> usize {
    1
}

fn default_clicks() -> ClickModel {
    ClickModel::Cascade { continuation: 0.6 }
}

/// A complete campaign description. Everything observable follows from
/// this value; two drives of an equal scenario agree record for record.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sessions")]
    pub sessions: usize,
    #[serde(default)]
    pub world: WorldSpec,
    #[serde(default)]
    pub behavior: BehaviorSpec,
    #[serde(default = "default_clicks")]
    pub clicks: ClickModel,
    #[serde(default)]
    pub systems: Vec<SystemPlan>,
    #[serde(default)]
    pub adhoc: Option<AdhocPlan>,
    #[serde(default)]
    pub recommendation: Option<RecPlan>,
    #[serde(default = "default_deadline_ms")]
    pub deadline_ms: u64,
    #[serde(default = "default_target_length")]
    pub target_length: usize,
    /// Page size to request per ranking; the app default when absent.
    #[serde(default)]
    pub page_size: Option<usize>,
    /// Panel size to request per recommendation; the lane maximum when
    /// absent.
    #[serde(default)]
    pub k_request: Option<usize>,
    /// Ship accumulated logs every this many sessions; always once at the
    /// end. Zero means only at the end.
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
}

impl Scenario {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).context("scenario")
    }

    /// A small two-lane campaign usable without a scenario file: a curated
    /// baseline, one run-backed ranking arm, and a two-way recommendation
    /// split.
    pub fn demo() -> Self {
        Self::from_toml(
            r#"
            seed = 7
            sessions = 200
            [[systems]]
            system_id = "prod-search"
            policy = "candidate_order"
            [[systems]]
            system_id = "exp-search"
            policy = "relevance_desc"
            [[systems]]
            system_id = "prod-rec"
            policy = "candidate_order"
            [[systems]]
            system_id = "exp-rec"
            policy = "relevance_desc"
            [adhoc]
            baseline = "prod-search"
            arms = ["exp-search"]
            [recommendation]
            experiment_id = "demo-split"
            salt = "demo"
            baseline = "prod-rec"
            arms = ["prod-rec", "exp-rec"]
            "#,
        )
        .expect("built-in scenario parses")
    }

    fn plan(&self, id: &str) -> anyhow::Result<&SystemPlan> {
        self.systems
            .iter()
            .find(|p| p.system_id == id)
            .with_context(|| format!("scenario references undefined system {id}"))
    }

    /// All system ids either lane references, baselines first.
    fn referenced(&self) -> Vec<String> {
        let mut ids = Vec::new();
        let mut push = |id: &str| {
            if !ids.iter().any(|x| x == id) {
                ids.push(id.to_string());
            }
        };
        if let Some(adhoc) = &self.adhoc {
            push(&adhoc.baseline);
            adhoc.arms.iter().for_each(|a| push(a));
        }
        if let Some(rec) = &self.recommendation {
            push(&rec.baseline);
            rec.arms.iter().for_each(|a| push(a));
        }
        ids
    }
}

/// Counters the driver accumulates; folded into the exported summary.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriveStats {
    pub rankings: u64,
    pub rec_panels: u64,
    pub rec_skips: u64,
    pub clicks: u64,
    pub votes: u64,
    pub leaves: u64,
    pub segments: u64,
}

/// The exported result of one campaign: scenario fingerprint, driver
/// counters, and the server dashboard verbatim.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub mode: String,
    pub sessions: usize,
    pub stats: DriveStats,
    pub report: serde_json::Value,
}

impl Summary {
    /// Stable byte encoding used for reproducibility comparisons.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

pub struct CampaignOutcome {
    pub summary: Summary,
    /// Shipped segments, available for in-process drives only.
    pub segments: Vec<Segment>,
}

/// Bearer token and participant name every scripted system registers
/// under. Campaigns model one lab operating all systems.
const SIM_TOKEN: &str = "tok-sim";
const SIM_PARTICIPANT: &str = "sim-lab";

fn sim_tokens() -> HashMap<String, String> {
    HashMap::from([(SIM_TOKEN.to_string(), SIM_PARTICIPANT.to_string())])
}

fn record_for(
    plan: &SystemPlan,
    task: Task,
    endpoint_url: Option<String>,
) -> anyhow::Result<SystemRecord> {
    let kind = if plan.endpoint {
        SystemKind::EndpointBacked
    } else if plan.policy == Policy::CandidateOrder {
        SystemKind::Baseline
    } else {
        SystemKind::RunBacked
    };
    Ok(SystemRecord {
        system_id: SystemId::new(plan.system_id.clone())?,
        kind,
        task,
        endpoint: endpoint_url,
        run_ref: match kind {
            SystemKind::RunBacked => Some(format!("{}.run", plan.system_id)),
            _ => None,
        },
    })
}

/// Registers every referenced system on the server and moves it to live,
/// uploading materialized run files where the transport is run-backed.
pub fn register_systems(
    server: &ServerCore,
    scenario: &Scenario,
    world: &World,
    endpoint_urls: &HashMap<String, String>,
) -> anyhow::Result<()> {
    let all_contexts: Vec<ContextId> = world.candidates.keys().cloned().collect();
    let adhoc_ids: Vec<String> = scenario
        .adhoc
        .iter()
        .flat_map(|l| {
            std::iter::once(l.baseline.clone()).chain(l.arms.iter().cloned())
        })
        .collect();
    for id in scenario.referenced() {
        let plan = scenario.plan(&id)?;
        let task = if adhoc_ids.contains(&id) {
            Task::Adhoc
        } else {
            Task::Recommendation
        };
        let record = record_for(plan, task, endpoint_urls.get(&id).cloned())?;
        let kind = record.kind;
        server
            .register_system(record, SIM_PARTICIPANT)
            .map_err(|e| anyhow::anyhow!("register {id}: {e}"))?;
        if kind == SystemKind::RunBacked {
            let run = plan
                .policy
                .as_run_set(world, &all_contexts, &id)
                .to_canonical_string();
            let outcome = server
                .upload_run(&SystemId::new(id.clone())?, &run, SIM_PARTICIPANT)
                .map_err(|e| anyhow::anyhow!("upload {id}: {e}"))?;
            anyhow::ensure!(outcome.accepted, "run for {id} rejected: {:?}", outcome.report);
        }
        server
            .set_status(&SystemId::new(id.clone())?, SystemStatus::Live, SIM_PARTICIPANT)
            .map_err(|e| anyhow::anyhow!("go live {id}: {e}"))?;
    }
    Ok(())
}

fn lane_setup(scenario: &Scenario) -> anyhow::Result<(Option<AdhocLane>, Option<RecLane>)> {
    let sys = |id: &str| SystemId::new(id).map_err(|e| anyhow::anyhow!("{id}: {e}"));
    let adhoc = match &scenario.adhoc {
        None => None,
        Some(plan) => Some(AdhocLane {
            baseline: sys(&plan.baseline)?,
            arms: plan
                .arms
                .iter()
                .map(|a| sys(a))
                .collect::<Result<_, _>>()?,
        }),
    };
    let rec = match &scenario.recommendation {
        None => None,
        Some(plan) => Some(RecLane {
            cfg: ExperimentConfig {
                experiment_id: plan.experiment_id.clone(),
                task: Task::Recommendation,
                arms: plan
                    .arms
                    .iter()
                    .map(|a| sys(a))
                    .collect::<Result<_, _>>()?,
                salt: plan.salt.clone(),
                k_min: plan.k_min,
                k_max: plan.k_max,
            },
            baseline: sys(&plan.baseline)?,
        }),
    };
    Ok((adhoc, rec))
}

/// Assembles the in-process platform: one app core, one server core, and
/// the registry filled in as a real cycle would have it.
pub fn build_inproc(scenario: &Scenario) -> anyhow::Result<(Platform, Arc<World>)> {
    let world = Arc::new(World::generate(&scenario.world, scenario.seed));
    let server = Arc::new(ServerCore::new(
        sim_tokens(),
        world.candidates.clone(),
        MetricsOptions::default(),
        None,
    )?);
    // Registry records need an endpoint URL even though in-process serving
    // never dials one.
    let endpoint_urls: HashMap<String, String> = scenario
        .systems
        .iter()
        .filter(|p| p.endpoint)
        .map(|p| {
            (
                p.system_id.clone(),
                format!("http://system.invalid/{}", p.system_id),
            )
        })
        .collect();
    register_systems(&server, scenario, &world, &endpoint_urls)?;

    let deadline = Duration::from_millis(scenario.deadline_ms);
    let all_contexts: Vec<ContextId> = world.candidates.keys().cloned().collect();
    let mut sources = HashMap::new();
    for id in scenario.referenced() {
        let plan = scenario.plan(&id)?;
        let system_id = SystemId::new(id.clone())?;
        let source = if plan.endpoint {
            SystemSource::Endpoint(Arc::new(PolicyEndpoint::new(
                plan.policy.clone(),
                world.clone(),
                plan.fault(),
                deadline,
                scenario.seed,
                &system_id,
            )))
        } else if plan.policy == Policy::CandidateOrder {
            SystemSource::CandidateOrder
        } else {
            SystemSource::Run(plan.policy.as_run_set(&world, &all_contexts, &id))
        };
        sources.insert(system_id, source);
    }

    let (adhoc, recommendation) = lane_setup(scenario)?;
    let app = Arc::new(AppCore::new(AppSetup {
        app_id: AppId::new("sim-app")?,
        sources,
        adhoc,
        recommendation,
        candidates: world.candidates.clone(),
        queries: world.queries.clone(),
        endpoint_deadline: deadline,
        target_length: scenario.target_length,
        logs: LogStore::in_memory(),
    })?);

    Ok((Platform::in_proc(app, server), world))
}

/// A wire deployment spun up on loopback: stub system endpoints, the
/// aggregation server, and the app, all behind real sockets.
pub struct WireHarness {
    pub platform: Platform,
    pub world: Arc<World>,
    pub app_base: String,
    pub server_base: String,
    handles: Vec<tokio::task::JoinHandle<()>>,
    /// Holds queries, candidates, and the app config for the run.
    _dir: tempfile::TempDir,
}

impl Drop for WireHarness {
    fn drop(&mut self) {
        for handle in &self.handles {
            handle.abort();
        }
    }
}

async fn serve_router(router: axum::Router) -> anyhow::Result<(String, tokio::task::JoinHandle<()>)> {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    let handle = tokio::spawn(async move {
        let _ = axum::serve(listener, router).await;
    });
    Ok((format!("http://{addr}"), handle))
}

/// Assembles the wire platform. Systems are registered on the server and
/// the app pulls every lane member from the registry at startup, so run
/// downloads and endpoint wiring follow the deployed path.
pub async fn build_wire(scenario: &Scenario) -> anyhow::Result<WireHarness> {
    let world = Arc::new(World::generate(&scenario.world, scenario.seed));
    let deadline = Duration::from_millis(scenario.deadline_ms);
    let mut handles = Vec::new();

    // Stub endpoint servers first; registration needs their URLs.
    let mut endpoint_urls = HashMap::new();
    for plan in &scenario.systems {
        if plan.endpoint {
            let endpoint = Arc::new(PolicyEndpoint::new(
                plan.policy.clone(),
                world.clone(),
                plan.fault(),
                deadline,
                scenario.seed,
                &SystemId::new(plan.system_id.clone())?,
            ));
            let (base, handle) = spawn_stub_system(endpoint).await?;
            endpoint_urls.insert(plan.system_id.clone(), base);
            handles.push(handle);
        }
    }

    let server = Arc::new(ServerCore::new(
        sim_tokens(),
        world.candidates.clone(),
        MetricsOptions::default(),
        None,
    )?);
    let (server_base, server_handle) =
        serve_router(livelab_server::http::router(server.clone())).await?;
    handles.push(server_handle);

    register_systems(&server, scenario, &world, &endpoint_urls)?;

    let dir = tempfile::tempdir()?;
    std::fs::write(dir.path().join("queries.tsv"), world.queries_text())?;
    std::fs::write(dir.path().join("candidates.tsv"), world.candidates_text())?;
    let config_text = wire_app_config(scenario, &server_base);
    let config_path = dir.path().join("app.toml");
    std::fs::write(&config_path, &config_text)?;

    let config = livelab_app::AppConfig::load(&config_path)?;
    let built = livelab_app::build_app(config, dir.path()).await?;
    let state = Arc::new(livelab_app::http::AppState {
        core: built.core,
        sink: built.sink,
    });
    let (app_base, app_handle) = serve_router(livelab_app::http::router(state)).await?;
    handles.push(app_handle);

    Ok(WireHarness {
        platform: Platform::wire(app_base.clone(), server_base.clone()),
        world,
        app_base,
        server_base,
        handles,
        _dir: dir,
    })
}

/// Renders the app config for a wire run. No system is defined locally;
/// every lane member resolves through the registry.
fn wire_app_config(scenario: &Scenario, server_base: &str) -> String {
    let mut out = String::new();
    out.push_str("app_id = \"sim-app\"\n");
    out.push_str(&format!("endpoint_deadline_ms = {}\n", scenario.deadline_ms));
    out.push_str(&format!("target_length = {}\n", scenario.target_length));
    out.push_str("\n[server]\n");
    out.push_str(&format!("url = \"{server_base}\"\n"));
    out.push_str(&format!("token = \"{SIM_TOKEN}\"\n"));
    out.push_str("\n[data]\n");
    out.push_str("queries = \"queries.tsv\"\n");
    out.push_str("candidates = \"candidates.tsv\"\n");
    if let Some(adhoc) = &scenario.adhoc {
        out.push_str("\n[adhoc]\n");
        out.push_str(&format!("baseline = \"{}\"\n", adhoc.baseline));
        let arms: Vec<String> = adhoc.arms.iter().map(|a| format!("\"{a}\"")).collect();
        out.push_str(&format!("arms = [{}]\n", arms.join(", ")));
    }
    if let Some(rec) = &scenario.recommendation {
        out.push_str("\n[recommendation]\n");
        out.push_str(&format!("experiment_id = \"{}\"\n", rec.experiment_id));
        out.push_str(&format!("salt = \"{}\"\n", rec.salt));
        out.push_str(&format!("baseline = \"{}\"\n", rec.baseline));
        let arms: Vec<String> = rec.arms.iter().map(|a| format!("\"{a}\"")).collect();
        out.push_str(&format!("arms = [{}]\n", arms.join(", ")));
        out.push_str(&format!("k_min = {}\n", rec.k_min));
        out.push_str(&format!("k_max = {}\n", rec.k_max));
    }
    out
}

/// Millisecond offsets inside a session window. The ranking phase owns
/// [0, 500s) and the recommendation phase [500s, 1000s); click spacing
/// keeps every follow-up inside its click's slot.
const SESSION_WINDOW_MS: i64 = 1_000_000;
const REC_PHASE_OFFSET_MS: i64 = 500_000;
const CLICK_SPACING_MS: i64 = 20_000;
const BOUNCE_LEAVE_MS: i64 = 2_000;
const VOTE_DWELL_MS: i64 = 15_000;
const ENGAGED_LEAVE_MS: i64 = 16_000;

struct SessionCursor {
    session: SessionId,
    counter: u32,
}

impl SessionCursor {
    fn event_id(&mut self) -> EventId {
        self.counter += 1;
        EventId::new(format!("e-{}-{:04}", self.session.as_str(), self.counter))
            .expect("generated ids are tokens")
    }
}

/// Plays out the visits after one served panel: clicks, then per click a
/// quick bounce or an engaged dwell with an optional vote.
#[allow(clippy::too_many_arguments)]
async fn play_visits(
    platform: &Platform,
    rng: &mut ChaCha8Rng,
    scenario: &Scenario,
    world: &World,
    cursor: &mut SessionCursor,
    impression_id: &livelab_core::model::ImpressionId,
    ctx: &ContextId,
    items: &[livelab_core::model::DocId],
    phase_base: i64,
    votes_allowed: bool,
    stats: &mut DriveStats,
) -> Result<(), DriveError> {
    let grades = world.grades_of(ctx, items);
    let clicked = scenario.clicks.draw_clicks(rng, &grades);
    for (i, &idx) in clicked.iter().enumerate() {
        let at = phase_base + (i as i64 + 1) * CLICK_SPACING_MS;
        debug_assert!(at + ENGAGED_LEAVE_MS < phase_base + REC_PHASE_OFFSET_MS);
        let doc = items[idx].clone();
        platform
            .feedback(FeedbackEvent {
                event_id: cursor.event_id(),
                session_id: cursor.session.clone(),
                impression_id: impression_id.clone(),
                kind: EventKind::Click,
                position: Some(idx as u32 + 1),
                doc: Some(doc.clone()),
                at: TimestampMs(at),
            })
            .await?;
        stats.clicks += 1;

        let bounced = rng.random::<f64>() < scenario.behavior.bounce_prob;
        if bounced {
            platform
                .feedback(FeedbackEvent {
                    event_id: cursor.event_id(),
                    session_id: cursor.session.clone(),
                    impression_id: impression_id.clone(),
                    kind: EventKind::PageLeave,
                    position: None,
                    doc: None,
                    at: TimestampMs(at + BOUNCE_LEAVE_MS),
                })
                .await?;
            stats.leaves += 1;
            continue;
        }
        let votes = votes_allowed && rng.random::<f64>() < scenario.behavior.vote_prob;
        if votes {
            let grade = grades[idx] as usize;
            let up = rng.random::<f64>() < scenario.behavior.vote_up_by_grade[grade];
            platform
                .feedback(FeedbackEvent {
                    event_id: cursor.event_id(),
                    session_id: cursor.session.clone(),
                    impression_id: impression_id.clone(),
                    kind: if up { EventKind::VoteUp } else { EventKind::VoteDown },
                    position: Some(idx as u32 + 1),
                    doc: Some(doc),
                    at: TimestampMs(at + VOTE_DWELL_MS),
                })
                .await?;
            stats.votes += 1;
        } else {
            platform
                .feedback(FeedbackEvent {
                    event_id: cursor.event_id(),
                    session_id: cursor.session.clone(),
                    impression_id: impression_id.clone(),
                    kind: EventKind::PageLeave,
                    position: None,
                    doc: None,
                    at: TimestampMs(at + ENGAGED_LEAVE_MS),
                })
                .await?;
            stats.leaves += 1;
        }
    }
    Ok(())
}

/// Drives the full scenario: every session, its feedback, and the snapshot
/// cadence. The caller supplies a platform already wired to the scenario.
pub async fn drive(
    platform: &Platform,
    world: &World,
    scenario: &Scenario,
) -> Result<DriveStats, DriveError> {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64_parts(&[
        b"campaign",
        &scenario.seed.to_le_bytes(),
    ]));
    let qids = world.query_ids();
    let mut stats = DriveStats::default();

    for n in 1..=scenario.sessions {
        let session = SessionId::new(format!("s{n:06}")).expect("generated ids are tokens");
        let base = (n as i64) * SESSION_WINDOW_MS;
        let mut cursor = SessionCursor {
            session: session.clone(),
            counter: 0,
        };

        if scenario.adhoc.is_some() {
            let qid = qids[rng.random_range(0..qids.len())].clone();
            let payload = platform
                .ranking(&session, &qid, scenario.page_size, TimestampMs(base))
                .await?;
            stats.rankings += 1;
            play_visits(
                platform,
                &mut rng,
                scenario,
                world,
                &mut cursor,
                &payload.impression_id,
                &qid,
                &payload.items,
                base,
                false,
                &mut stats,
            )
            .await?;
        }

        if scenario.recommendation.is_some() {
            let item = world.seeds[rng.random_range(0..world.seeds.len())].clone();
            let rec_base = base + REC_PHASE_OFFSET_MS;
            let payload = platform
                .recommendation(&session, &item, scenario.k_request, TimestampMs(rec_base))
                .await?;
            match payload.impression_id {
                None => stats.rec_skips += 1,
                Some(impression_id) => {
                    stats.rec_panels += 1;
                    play_visits(
                        platform,
                        &mut rng,
                        scenario,
                        world,
                        &mut cursor,
                        &impression_id,
                        &item,
                        &payload.items,
                        rec_base,
                        true,
                        &mut stats,
                    )
                    .await?;
                }
            }
        }

        if scenario.snapshot_every > 0 && n % scenario.snapshot_every == 0 {
            stats.segments += platform.flush().await?;
        }
    }
    stats.segments += platform.flush().await?;
    Ok(stats)
}

/// Runs the scenario fully in process and returns the summary plus every
/// shipped segment for offline recomputation.
pub async fn run_inproc(scenario: &Scenario) -> anyhow::Result<CampaignOutcome> {
    let (platform, world) = build_inproc(scenario)?;
    let stats = drive(&platform, &world, scenario).await?;
    let report = platform.report().await?;
    Ok(CampaignOutcome {
        summary: Summary {
            seed: scenario.seed,
            mode: "inproc".to_string(),
            sessions: scenario.sessions,
            stats,
            report,
        },
        segments: platform.take_segments(),
    })
}

/// Runs the scenario over loopback HTTP end to end.
pub async fn run_wire(scenario: &Scenario) -> anyhow::Result<CampaignOutcome> {
    let harness = build_wire(scenario).await?;
    let stats = drive(&harness.platform, &harness.world, scenario).await?;
    let report = harness.platform.report().await?;
    Ok(CampaignOutcome {
        summary: Summary {
            seed: scenario.seed,
            mode: "wire".to_string(),
            sessions: scenario.sessions,
            stats,
            report,
        },
        segments: Vec::new(),
    })
}
