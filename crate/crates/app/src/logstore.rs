//! Durable append-only storage for the two serving logs.
//!
//! Appends go straight to disk (length-prefixed JSON frames) and into an
//! in-memory pending buffer. Cutting a segment drains the buffer under a
//! fresh sequence number; the files themselves are never rewritten, so
//! `app replay` can reconstruct everything after a crash.
//!
//! Segment sequence numbers restart at 1 per process. The aggregation
//! server deduplicates by (app_id, seq), so an app restart must use a
//! fresh app_id (or an operator resets the server state) to re-ship; at
//! desk scale this is the documented operating procedure.

use crate::error::AppError;
use livelab_core::log::{
    read_frames_lossy, write_frame, EventLogRecord, LogError, OutcomeRecord, Segment,
};
use livelab_core::model::AppId;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write as _};
use std::path::Path;
use std::sync::Mutex;

pub const EVENTS_FILE: &str = "events.log";
pub const OUTCOMES_FILE: &str = "outcomes.log";

struct Sink {
    file: Option<BufWriter<File>>,
}

impl Sink {
    fn append<T: serde::Serialize>(&mut self, record: &T) -> Result<(), AppError> {
        if let Some(file) = &mut self.file {
            write_frame(file, record).map_err(|e| AppError::Log(e.to_string()))?;
            file.flush().map_err(|e| AppError::Log(e.to_string()))?;
        }
        Ok(())
    }
}

struct Inner {
    events: Sink,
    outcomes: Sink,
    pending_events: Vec<EventLogRecord>,
    pending_outcomes: Vec<OutcomeRecord>,
    next_seq: u64,
}

/// Single serialized appender feeding both logs.
pub struct LogStore {
    inner: Mutex<Inner>,
}

impl LogStore {
    /// Appends to `events.log` and `outcomes.log` under `dir`, creating
    /// them as needed. Existing bytes are left untouched.
    pub fn open(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        let open = |name: &str| -> std::io::Result<BufWriter<File>> {
            Ok(BufWriter::new(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(dir.join(name))?,
            ))
        };
        Ok(Self {
            inner: Mutex::new(Inner {
                events: Sink {
                    file: Some(open(EVENTS_FILE)?),
                },
                outcomes: Sink {
                    file: Some(open(OUTCOMES_FILE)?),
                },
                pending_events: Vec::new(),
                pending_outcomes: Vec::new(),
                next_seq: 1,
            }),
        })
    }

    /// Buffer-only store for in-process harnesses and tests.
    pub fn in_memory() -> Self {
        Self {
            inner: Mutex::new(Inner {
                events: Sink { file: None },
                outcomes: Sink { file: None },
                pending_events: Vec::new(),
                pending_outcomes: Vec::new(),
                next_seq: 1,
            }),
        }
    }

    pub fn append_event(&self, record: EventLogRecord) -> Result<(), AppError> {
        let mut inner = self.inner.lock().expect("log store lock");
        inner.events.append(&record)?;
        inner.pending_events.push(record);
        Ok(())
    }

    pub fn append_outcome(&self, record: OutcomeRecord) -> Result<(), AppError> {
        let mut inner = self.inner.lock().expect("log store lock");
        inner.outcomes.append(&record)?;
        inner.pending_outcomes.push(record);
        Ok(())
    }

    pub fn pending_records(&self) -> usize {
        let inner = self.inner.lock().expect("log store lock");
        inner.pending_events.len() + inner.pending_outcomes.len()
    }

    /// Drains buffered records into the next-numbered segment; `None` when
    /// nothing accumulated since the last cut.
    pub fn cut_segment(&self, app_id: &AppId) -> Option<Segment> {
        let mut inner = self.inner.lock().expect("log store lock");
        if inner.pending_events.is_empty() && inner.pending_outcomes.is_empty() {
            return None;
        }
        let seq = inner.next_seq;
        inner.next_seq += 1;
        Some(Segment {
            app_id: app_id.clone(),
            seq,
            events: std::mem::take(&mut inner.pending_events),
            outcomes: std::mem::take(&mut inner.pending_outcomes),
        })
    }
}

/// Reads both logs back from disk, tolerating a torn final frame in each.
pub fn replay_dir(dir: &Path) -> Result<(Vec<EventLogRecord>, Vec<OutcomeRecord>), LogError> {
    let read_log = |name: &str| -> Result<Vec<u8>, LogError> {
        let path = dir.join(name);
        if path.exists() {
            Ok(std::fs::read(&path)?)
        } else {
            Ok(Vec::new())
        }
    };
    let events = read_frames_lossy(&mut read_log(EVENTS_FILE)?.as_slice())?;
    let outcomes = read_frames_lossy(&mut read_log(OUTCOMES_FILE)?.as_slice())?;
    Ok((events, outcomes))
}
