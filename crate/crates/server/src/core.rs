//! Shared server state: registry, segment intake, report assembly.

use crate::config::ServerConfig;
use crate::error::ServerError;
use crate::registry::{Registry, RunUploadOutcome};
use crate::store::SegmentStore;
use livelab_core::log::Segment;
use livelab_core::metrics::MetricsOptions;
use livelab_core::model::{
    ContextId, RegistryEntry, SystemId, SystemRecord, SystemStatus, TimestampMs,
};
use livelab_core::report::{build_report, DashboardReport};
use livelab_core::run::CandidateList;
use livelab_core::wire::SnapshotAck;
use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

pub const REGISTRY_FILE: &str = "registry.json";

/// The aggregation server's state machine. Interior mutability keeps the
/// HTTP layer free of lock plumbing; lock order is registry before store.
pub struct ServerCore {
    /// Bearer token to participant name.
    tokens: HashMap<String, String>,
    candidates: BTreeMap<ContextId, CandidateList>,
    metrics: MetricsOptions,
    registry: Mutex<Registry>,
    store: Mutex<SegmentStore>,
    /// Registry snapshots are rewritten here after each mutation.
    registry_path: Option<PathBuf>,
}

impl ServerCore {
    pub fn new(
        tokens: HashMap<String, String>,
        candidates: BTreeMap<ContextId, CandidateList>,
        metrics: MetricsOptions,
        data_dir: Option<&Path>,
    ) -> std::io::Result<Self> {
        let (registry, store, registry_path) = match data_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let path = dir.join(REGISTRY_FILE);
                let registry = if path.exists() {
                    serde_json::from_str(&std::fs::read_to_string(&path)?)
                        .map_err(|e| std::io::Error::other(e.to_string()))?
                } else {
                    Registry::default()
                };
                (registry, SegmentStore::open(dir)?, Some(path))
            }
            None => (Registry::default(), SegmentStore::in_memory(), None),
        };
        Ok(Self {
            tokens,
            candidates,
            metrics,
            registry: Mutex::new(registry),
            store: Mutex::new(store),
            registry_path,
        })
    }

    pub fn from_config(config: &ServerConfig, base_dir: &Path) -> anyhow::Result<Self> {
        let tokens = config
            .participants
            .iter()
            .map(|p| (p.token.clone(), p.name.clone()))
            .collect();
        let candidates = match &config.candidates {
            Some(p) => {
                let p = if p.is_absolute() {
                    p.clone()
                } else {
                    base_dir.join(p)
                };
                livelab_core::run::load_candidates(&p)
                    .map_err(|e| anyhow::anyhow!("candidates {}: {e}", p.display()))?
            }
            None => Default::default(),
        };
        let metrics = MetricsOptions {
            dwell_threshold_ms: config
                .dwell_threshold_ms
                .unwrap_or(livelab_core::metrics::DEFAULT_DWELL_THRESHOLD_MS),
        };
        let data_dir = config.data_dir.as_ref().map(|d| {
            if d.is_absolute() {
                d.clone()
            } else {
                base_dir.join(d)
            }
        });
        Ok(Self::new(tokens, candidates, metrics, data_dir.as_deref())?)
    }

    /// Resolves a bearer token to its participant, or refuses.
    pub fn authenticate(&self, token: Option<&str>) -> Result<&str, ServerError> {
        token
            .and_then(|t| self.tokens.get(t))
            .map(String::as_str)
            .ok_or(ServerError::Unauthorized)
    }

    fn persist_registry(&self, registry: &Registry) {
        if let Some(path) = &self.registry_path {
            match serde_json::to_string_pretty(registry) {
                Ok(json) => {
                    if let Err(e) = std::fs::write(path, json) {
                        tracing::error!(%e, "registry snapshot write failed");
                    }
                }
                Err(e) => tracing::error!(%e, "registry serialization failed"),
            }
        }
    }

    fn now() -> TimestampMs {
        let ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as i64)
            .unwrap_or(0);
        TimestampMs(ms)
    }

    pub fn register_system(
        &self,
        record: SystemRecord,
        participant: &str,
    ) -> Result<RegistryEntry, ServerError> {
        let mut registry = self.registry.lock().expect("registry lock");
        let entry = registry.register(record, participant, Self::now())?;
        self.persist_registry(&registry);
        Ok(entry)
    }

    pub fn upload_run(
        &self,
        id: &SystemId,
        text: &str,
        participant: &str,
    ) -> Result<RunUploadOutcome, ServerError> {
        let mut registry = self.registry.lock().expect("registry lock");
        let outcome = registry.upload_run(id, text, participant, &self.candidates)?;
        self.persist_registry(&registry);
        Ok(outcome)
    }

    pub fn set_status(
        &self,
        id: &SystemId,
        next: SystemStatus,
        participant: &str,
    ) -> Result<RegistryEntry, ServerError> {
        let mut registry = self.registry.lock().expect("registry lock");
        let entry = registry.set_status(id, next, participant)?;
        self.persist_registry(&registry);
        Ok(entry)
    }

    pub fn entries(&self) -> Vec<RegistryEntry> {
        self.registry.lock().expect("registry lock").entries()
    }

    pub fn entry(&self, id: &SystemId) -> Result<RegistryEntry, ServerError> {
        self.registry
            .lock()
            .expect("registry lock")
            .entry(id)
            .cloned()
    }

    pub fn run_text(&self, id: &SystemId) -> Result<String, ServerError> {
        self.registry
            .lock()
            .expect("registry lock")
            .run_text(id)
            .map(str::to_string)
    }

    pub fn ingest_segment(&self, segment: Segment) -> SnapshotAck {
        self.store.lock().expect("store lock").ingest(segment)
    }

    /// Assembles the dashboard from everything applied so far. Pure with
    /// respect to the stored logs: the same records give the same report.
    pub fn report(&self) -> DashboardReport {
        let metas = self.registry.lock().expect("registry lock").metas();
        let store = self.store.lock().expect("store lock");
        build_report(
            store.events(),
            store.outcomes(),
            &metas,
            store.segments_applied(),
            &self.metrics,
        )
    }
}
