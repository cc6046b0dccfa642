//! The system registry: who registered what, in which lifecycle stage,
//! and the validated run content for run-backed systems.

use crate::error::ServerError;
use livelab_core::model::{
    RegistryEntry, SystemId, SystemKind, SystemRecord, SystemStatus, TimestampMs,
};
use livelab_core::report::SystemMeta;
use livelab_core::run::{
    parse_run_file, validate_against_candidates, CandidateList, RunSet,
};
use livelab_core::model::ContextId;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One registered system with its server-side attachments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoredSystem {
    pub entry: RegistryEntry,
    /// Canonical serialization of the accepted run upload.
    pub run_text: Option<String>,
    /// Text report of the most recent upload attempt, accepted or not.
    pub last_validation: Option<String>,
}

/// Result of one run upload attempt.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunUploadOutcome {
    pub accepted: bool,
    pub report: String,
    pub status: SystemStatus,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
pub struct Registry {
    systems: BTreeMap<SystemId, StoredSystem>,
}

impl Registry {
    pub fn register(
        &mut self,
        record: SystemRecord,
        participant: &str,
        at: TimestampMs,
    ) -> Result<RegistryEntry, ServerError> {
        record
            .validate()
            .map_err(|e| ServerError::BadRequest(e.to_string()))?;
        if self.systems.contains_key(&record.system_id) {
            return Err(ServerError::DuplicateSystem(record.system_id));
        }
        let entry = RegistryEntry {
            record,
            participant: participant.to_string(),
            status: SystemStatus::Submitted,
            submitted_at: at,
        };
        self.systems.insert(
            entry.record.system_id.clone(),
            StoredSystem {
                entry: entry.clone(),
                run_text: None,
                last_validation: None,
            },
        );
        Ok(entry)
    }

    fn owned(
        &mut self,
        id: &SystemId,
        participant: &str,
    ) -> Result<&mut StoredSystem, ServerError> {
        let stored = self
            .systems
            .get_mut(id)
            .ok_or_else(|| ServerError::UnknownSystem(id.clone()))?;
        if stored.entry.participant != participant {
            return Err(ServerError::NotOwner(id.clone()));
        }
        Ok(stored)
    }

    /// Validates and stores one run upload. An accepted upload moves a
    /// submitted system to validated; a rejected one changes nothing but
    /// the attached report.
    pub fn upload_run(
        &mut self,
        id: &SystemId,
        text: &str,
        participant: &str,
        candidates: &BTreeMap<ContextId, CandidateList>,
    ) -> Result<RunUploadOutcome, ServerError> {
        let stored = self.owned(id, participant)?;
        if stored.entry.record.kind == SystemKind::EndpointBacked {
            return Err(ServerError::BadRequest(format!(
                "{id} is endpoint-backed and takes no run upload"
            )));
        }
        let run = match parse_run_file(text) {
            Ok(run) => run,
            Err(e) => {
                let report = format!("verdict: rejected\nparse error: {e}\n");
                stored.last_validation = Some(report.clone());
                return Ok(RunUploadOutcome {
                    accepted: false,
                    report,
                    status: stored.entry.status,
                });
            }
        };
        let validation = validate_against_candidates(&run, candidates);
        let report = validation.render_text();
        stored.last_validation = Some(report.clone());
        if !validation.accepted {
            return Ok(RunUploadOutcome {
                accepted: false,
                report,
                status: stored.entry.status,
            });
        }
        stored.run_text = Some(run.to_canonical_string());
        if stored.entry.status == SystemStatus::Submitted {
            stored.entry.status = SystemStatus::Validated;
        }
        Ok(RunUploadOutcome {
            accepted: true,
            report,
            status: stored.entry.status,
        })
    }

    /// Applies one forward lifecycle transition. A run-backed system may
    /// not go live without an accepted run on file.
    pub fn set_status(
        &mut self,
        id: &SystemId,
        next: SystemStatus,
        participant: &str,
    ) -> Result<RegistryEntry, ServerError> {
        let stored = self.owned(id, participant)?;
        if !stored.entry.status.may_transition_to(next) {
            return Err(ServerError::BadTransition(
                id.clone(),
                format!("{} -> {next}", stored.entry.status),
            ));
        }
        if next == SystemStatus::Live
            && stored.entry.record.kind == SystemKind::RunBacked
            && stored.run_text.is_none()
        {
            return Err(ServerError::NoRun(id.clone()));
        }
        stored.entry.status = next;
        Ok(stored.entry.clone())
    }

    pub fn entry(&self, id: &SystemId) -> Result<&RegistryEntry, ServerError> {
        self.systems
            .get(id)
            .map(|s| &s.entry)
            .ok_or_else(|| ServerError::UnknownSystem(id.clone()))
    }

    pub fn run_text(&self, id: &SystemId) -> Result<&str, ServerError> {
        let stored = self
            .systems
            .get(id)
            .ok_or_else(|| ServerError::UnknownSystem(id.clone()))?;
        stored
            .run_text
            .as_deref()
            .ok_or_else(|| ServerError::NoRun(id.clone()))
    }

    pub fn run_set(&self, id: &SystemId) -> Result<RunSet, ServerError> {
        let text = self.run_text(id)?;
        parse_run_file(text).map_err(|e| ServerError::Storage(e.to_string()))
    }

    pub fn last_validation(&self, id: &SystemId) -> Result<Option<&str>, ServerError> {
        let stored = self
            .systems
            .get(id)
            .ok_or_else(|| ServerError::UnknownSystem(id.clone()))?;
        Ok(stored.last_validation.as_deref())
    }

    pub fn entries(&self) -> Vec<RegistryEntry> {
        self.systems.values().map(|s| s.entry.clone()).collect()
    }

    pub fn metas(&self) -> Vec<SystemMeta> {
        self.systems.values().map(|s| (&s.entry).into()).collect()
    }

    pub fn len(&self) -> usize {
        self.systems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.systems.is_empty()
    }
}
