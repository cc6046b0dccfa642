//! TOML configuration and assembly of a runnable app.
//!
//! A config either defines every system locally (standalone mode) or names
//! a central server from which registry entries and uploaded run files are
//! pulled at startup. Relative paths resolve against the config file's
//! directory.

use crate::core::{AdhocLane, AppCore, AppSetup, RecLane, SystemSource};
use crate::core::{DEFAULT_ENDPOINT_DEADLINE, DEFAULT_TARGET_LENGTH};
use crate::endpoint::HttpEndpoint;
use crate::logstore::LogStore;
use crate::snapshot::{HttpSink, SnapshotSink};
use livelab_core::assign::{ExperimentConfig, DEFAULT_K_MAX, DEFAULT_K_MIN};
use livelab_core::model::{AppId, RegistryEntry, SystemId, SystemKind, Task};
use livelab_core::run::{load_candidates, load_queries, load_run_file, parse_run_file};
use serde::Deserialize;
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("read {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("parse {0}: {1}")]
    Parse(PathBuf, toml::de::Error),
    #[error("{0}: {1}")]
    RunFile(PathBuf, livelab_core::run::RunFileError),
    #[error("config: {0}")]
    Invalid(String),
    #[error("server {0}: {1}")]
    Server(String, String),
}

fn default_listen() -> String {
    "127.0.0.1:8080".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    pub app_id: String,
    #[serde(default = "default_listen")]
    pub listen: String,
    #[serde(default)]
    pub endpoint_deadline_ms: Option<u64>,
    #[serde(default)]
    pub target_length: Option<usize>,
    /// Log directory; records stay in memory only when absent.
    #[serde(default)]
    pub log_dir: Option<PathBuf>,
    #[serde(default)]
    pub server: Option<ServerLink>,
    #[serde(default)]
    pub data: DataFiles,
    #[serde(default)]
    pub adhoc: Option<AdhocSection>,
    #[serde(default)]
    pub recommendation: Option<RecSection>,
    #[serde(default)]
    pub systems: Vec<SystemSection>,
}

/// Connection to the aggregation server.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerLink {
    pub url: String,
    pub token: String,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataFiles {
    #[serde(default)]
    pub queries: Option<PathBuf>,
    #[serde(default)]
    pub candidates: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdhocSection {
    pub baseline: String,
    #[serde(default)]
    pub arms: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecSection {
    pub experiment_id: String,
    pub salt: String,
    pub baseline: String,
    pub arms: Vec<String>,
    #[serde(default)]
    pub k_min: Option<usize>,
    #[serde(default)]
    pub k_max: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    CandidateOrder,
    Run,
    Endpoint,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub system_id: String,
    pub source: SourceKind,
    #[serde(default)]
    pub run_file: Option<PathBuf>,
    #[serde(default)]
    pub endpoint: Option<String>,
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse(path.to_path_buf(), e))
    }
}

/// A fully assembled app: the serving core plus its delivery wiring.
pub struct BuiltApp {
    pub core: Arc<AppCore>,
    pub listen: String,
    pub sink: Option<Arc<dyn SnapshotSink>>,
}

/// Assembles the serving core from a loaded config. Pulls registry entries
/// and run files from the central server for any system the lanes reference
/// but the config does not define locally.
pub async fn build_app(config: AppConfig, base_dir: &Path) -> Result<BuiltApp, ConfigError> {
    let bad = |msg: String| ConfigError::Invalid(msg);
    let app_id =
        AppId::new(config.app_id.clone()).map_err(|e| bad(format!("app_id: {e}")))?;
    let resolve = |p: &PathBuf| -> PathBuf {
        if p.is_absolute() {
            p.clone()
        } else {
            base_dir.join(p)
        }
    };

    let queries = match &config.data.queries {
        Some(p) => {
            let p = resolve(p);
            load_queries(&p).map_err(|e| ConfigError::RunFile(p, e))?
        }
        None => Default::default(),
    };
    let candidates = match &config.data.candidates {
        Some(p) => {
            let p = resolve(p);
            load_candidates(&p).map_err(|e| ConfigError::RunFile(p, e))?
        }
        None => Default::default(),
    };

    let mut sources: HashMap<SystemId, SystemSource> = HashMap::new();
    for section in &config.systems {
        let id = SystemId::new(section.system_id.clone())
            .map_err(|e| bad(format!("system_id {}: {e}", section.system_id)))?;
        let source = match section.source {
            SourceKind::CandidateOrder => SystemSource::CandidateOrder,
            SourceKind::Run => {
                let p = section
                    .run_file
                    .as_ref()
                    .ok_or_else(|| bad(format!("{id}: run source needs run_file")))?;
                let p = resolve(p);
                let rs = load_run_file(&p).map_err(|e| ConfigError::RunFile(p, e))?;
                SystemSource::Run(rs)
            }
            SourceKind::Endpoint => {
                let url = section
                    .endpoint
                    .as_ref()
                    .ok_or_else(|| bad(format!("{id}: endpoint source needs endpoint")))?;
                SystemSource::Endpoint(Arc::new(HttpEndpoint::new(url.clone())))
            }
        };
        if sources.insert(id.clone(), source).is_some() {
            return Err(bad(format!("system {id} defined twice")));
        }
    }

    let adhoc = config
        .adhoc
        .as_ref()
        .map(|section| -> Result<AdhocLane, ConfigError> {
            Ok(AdhocLane {
                baseline: SystemId::new(section.baseline.clone())
                    .map_err(|e| bad(format!("adhoc.baseline: {e}")))?,
                arms: section
                    .arms
                    .iter()
                    .map(|a| SystemId::new(a.clone()).map_err(|e| bad(format!("adhoc.arms: {e}"))))
                    .collect::<Result<_, _>>()?,
            })
        })
        .transpose()?;

    let recommendation = config
        .recommendation
        .as_ref()
        .map(|section| -> Result<RecLane, ConfigError> {
            let arms = section
                .arms
                .iter()
                .map(|a| {
                    SystemId::new(a.clone())
                        .map_err(|e| bad(format!("recommendation.arms: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mut cfg = ExperimentConfig::new(
                section.experiment_id.clone(),
                Task::Recommendation,
                arms,
                section.salt.clone(),
            )
            .map_err(|e| bad(format!("recommendation: {e}")))?;
            cfg.k_min = section.k_min.unwrap_or(DEFAULT_K_MIN);
            cfg.k_max = section.k_max.unwrap_or(DEFAULT_K_MAX);
            cfg.validate().map_err(|e| bad(format!("recommendation: {e}")))?;
            Ok(RecLane {
                cfg,
                baseline: SystemId::new(section.baseline.clone())
                    .map_err(|e| bad(format!("recommendation.baseline: {e}")))?,
            })
        })
        .transpose()?;

    // Any lane member without a local definition must come from the server
    // registry.
    let mut missing: Vec<SystemId> = Vec::new();
    let mut want = |id: &SystemId| {
        if !sources.contains_key(id) && !missing.contains(id) {
            missing.push(id.clone());
        }
    };
    if let Some(lane) = &adhoc {
        want(&lane.baseline);
        lane.arms.iter().for_each(&mut want);
    }
    if let Some(lane) = &recommendation {
        want(&lane.baseline);
        lane.cfg.arms.iter().for_each(&mut want);
    }

    if !missing.is_empty() {
        let link = config.server.as_ref().ok_or_else(|| {
            bad(format!(
                "no source for {} and no [server] to fetch from",
                missing
                    .iter()
                    .map(|s| s.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })?;
        let fetched = fetch_registry_sources(link, &missing).await?;
        sources.extend(fetched);
    }

    let logs = match &config.log_dir {
        Some(dir) => {
            let dir = resolve(dir);
            LogStore::open(&dir).map_err(|e| ConfigError::Io(dir, e))?
        }
        None => LogStore::in_memory(),
    };

    let core = AppCore::new(AppSetup {
        app_id,
        sources,
        adhoc,
        recommendation,
        candidates,
        queries,
        endpoint_deadline: config
            .endpoint_deadline_ms
            .map(Duration::from_millis)
            .unwrap_or(DEFAULT_ENDPOINT_DEADLINE),
        target_length: config.target_length.unwrap_or(DEFAULT_TARGET_LENGTH),
        logs,
    })
    .map_err(|e| ConfigError::Invalid(e.to_string()))?;

    let sink: Option<Arc<dyn SnapshotSink>> = config
        .server
        .as_ref()
        .map(|link| Arc::new(HttpSink::new(&link.url, &link.token)) as Arc<dyn SnapshotSink>);

    Ok(BuiltApp {
        core: Arc::new(core),
        listen: config.listen.clone(),
        sink,
    })
}

/// Pulls the named systems from the server registry and materializes their
/// sources (uploaded run files are downloaded, endpoints are dialed lazily).
async fn fetch_registry_sources(
    link: &ServerLink,
    wanted: &[SystemId],
) -> Result<HashMap<SystemId, SystemSource>, ConfigError> {
    let base = link.url.trim_end_matches('/');
    let client = reqwest::Client::builder()
        .timeout(Duration::from_secs(10))
        .build()
        .expect("reqwest client");
    let err = |msg: String| ConfigError::Server(base.to_string(), msg);

    let entries: Vec<RegistryEntry> = client
        .get(format!("{base}/api/systems"))
        .bearer_auth(&link.token)
        .send()
        .await
        .map_err(|e| err(e.to_string()))?
        .error_for_status()
        .map_err(|e| err(e.to_string()))?
        .json()
        .await
        .map_err(|e| err(format!("registry body: {e}")))?;
    let by_id: HashMap<&SystemId, &RegistryEntry> = entries
        .iter()
        .map(|entry| (&entry.record.system_id, entry))
        .collect();

    let mut out = HashMap::new();
    for id in wanted {
        let entry = by_id
            .get(id)
            .ok_or_else(|| err(format!("registry has no system {id}")))?;
        let source = match (&entry.record.kind, &entry.record.endpoint) {
            (SystemKind::EndpointBacked, Some(url)) => {
                SystemSource::Endpoint(Arc::new(HttpEndpoint::new(url.clone())))
            }
            (SystemKind::Baseline, Some(url)) => {
                SystemSource::Endpoint(Arc::new(HttpEndpoint::new(url.clone())))
            }
            (SystemKind::Baseline, None) if entry.record.run_ref.is_none() => {
                SystemSource::CandidateOrder
            }
            _ => {
                let text = client
                    .get(format!("{base}/api/systems/{id}/run"))
                    .bearer_auth(&link.token)
                    .send()
                    .await
                    .map_err(|e| err(e.to_string()))?
                    .error_for_status()
                    .map_err(|e| err(format!("run for {id}: {e}")))?
                    .text()
                    .await
                    .map_err(|e| err(e.to_string()))?;
                let rs = parse_run_file(&text)
                    .map_err(|e| err(format!("run for {id}: {e}")))?;
                SystemSource::Run(rs)
            }
        };
        out.insert(id.clone(), source);
    }
    Ok(out)
}
