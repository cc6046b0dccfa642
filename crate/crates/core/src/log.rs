//! Event log records, binary framing, and snapshot segments.
//!
//! The serving app appends two streams to local storage: the event log
//! (impressions and user feedback) and the outcome log (per-impression
//! win/loss/tie credit, rewritten as clicks arrive). Both use the same
//! framing: a little-endian u32 byte length followed by one JSON record.
//! Appends never rewrite earlier bytes, so the logs replay after a crash
//! up to the last complete frame.
//!
//! Snapshots cut both streams into [`Segment`]s numbered 1.. per app; the
//! aggregation server applies segments exactly once and in order.

use crate::model::{
    AppId, ContextId, DocId, FeedbackEvent, ImpressionId, Outcome, SessionId, SystemId, Task,
    TimestampMs,
};
use crate::interleave::LabeledDoc;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::io::{self, Read, Write};
use thiserror::Error;

/// Upper bound on one frame's payload, guarding against corrupt lengths.
const MAX_FRAME_BYTES: u32 = 64 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("frame {index}: {reason}")]
    Corrupt { index: usize, reason: String },
}

/// What the user was actually shown, with server-side attribution detail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Serving {
    /// A team-drafted merge of the baseline and the experimental arm.
    Interleaved {
        baseline: SystemId,
        items: Vec<LabeledDoc>,
        coin_trace: Vec<bool>,
    },
    /// A plain list from a single system: recommendation panels, and any
    /// baseline-only fallback response.
    Panel {
        served_by: SystemId,
        items: Vec<DocId>,
    },
}

impl Serving {
    pub fn docs(&self) -> Vec<&DocId> {
        match self {
            Serving::Interleaved { items, .. } => items.iter().map(|i| &i.doc).collect(),
            Serving::Panel { items, .. } => items.iter().collect(),
        }
    }

    pub fn contains(&self, doc: &DocId) -> bool {
        match self {
            Serving::Interleaved { items, .. } => items.iter().any(|i| &i.doc == doc),
            Serving::Panel { items, .. } => items.iter().any(|i| i == doc),
        }
    }
}

/// One served panel. `arm` is the experiment arm the impression counts
/// toward; when `fallback` is set the user actually saw the baseline list
/// in `serving`, and the impression is excluded from quality metrics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpressionRecord {
    pub impression_id: ImpressionId,
    pub session_id: SessionId,
    pub task: Task,
    pub context: ContextId,
    pub arm: SystemId,
    pub fallback: bool,
    pub at: TimestampMs,
    pub serving: Serving,
}

/// One record in the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventLogRecord {
    Impression(ImpressionRecord),
    Feedback(FeedbackEvent),
}

impl EventLogRecord {
    pub fn at(&self) -> TimestampMs {
        match self {
            EventLogRecord::Impression(imp) => imp.at,
            EventLogRecord::Feedback(ev) => ev.at,
        }
    }

    pub fn session_id(&self) -> &SessionId {
        match self {
            EventLogRecord::Impression(imp) => &imp.session_id,
            EventLogRecord::Feedback(ev) => &ev.session_id,
        }
    }
}

/// Credit standing of one interleaved impression. The serving path writes
/// an initial tie at impression time; each accepted click rewrites the
/// outcome, so the latest record per impression is authoritative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub impression_id: ImpressionId,
    pub experimental: SystemId,
    pub outcome: Outcome,
    /// Distinct documents clicked when this credit was computed.
    pub clicked_docs: u32,
    pub at: TimestampMs,
}

/// One shipped slice of both logs. Sequence numbers start at 1 and
/// increase by 1 per app instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub app_id: AppId,
    pub seq: u64,
    pub events: Vec<EventLogRecord>,
    pub outcomes: Vec<OutcomeRecord>,
}

impl Segment {
    pub fn is_empty(&self) -> bool {
        self.events.is_empty() && self.outcomes.is_empty()
    }
}

/// Appends one record as a length-prefixed JSON frame.
pub fn write_frame<T: Serialize>(w: &mut impl Write, record: &T) -> Result<(), LogError> {
    let body = serde_json::to_vec(record).map_err(|e| LogError::Corrupt {
        index: 0,
        reason: format!("serialize: {e}"),
    })?;
    let len = u32::try_from(body.len()).map_err(|_| LogError::Corrupt {
        index: 0,
        reason: "record exceeds frame size".to_string(),
    })?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&body)?;
    Ok(())
}

/// Reads every complete frame from the stream. A truncated final frame is
/// reported as corruption with its index; callers that tolerate torn tails
/// (crash recovery) use [`read_frames_lossy`].
pub fn read_frames<T: DeserializeOwned>(r: &mut impl Read) -> Result<Vec<T>, LogError> {
    collect_frames(r, false)
}

/// Reads frames up to the first truncated tail, silently dropping it.
/// Decode failures in complete frames are still errors.
pub fn read_frames_lossy<T: DeserializeOwned>(r: &mut impl Read) -> Result<Vec<T>, LogError> {
    collect_frames(r, true)
}

fn collect_frames<T: DeserializeOwned>(
    r: &mut impl Read,
    tolerate_torn_tail: bool,
) -> Result<Vec<T>, LogError> {
    let mut out = Vec::new();
    let mut index = 0usize;
    loop {
        let mut len_buf = [0u8; 4];
        match read_exact_or_eof(r, &mut len_buf)? {
            ReadState::Eof => return Ok(out),
            ReadState::Partial if tolerate_torn_tail => return Ok(out),
            ReadState::Partial => {
                return Err(LogError::Corrupt {
                    index,
                    reason: "truncated length prefix".to_string(),
                });
            }
            ReadState::Full => {}
        }
        let len = u32::from_le_bytes(len_buf);
        if len > MAX_FRAME_BYTES {
            return Err(LogError::Corrupt {
                index,
                reason: format!("frame length {len} exceeds cap"),
            });
        }
        let mut body = vec![0u8; len as usize];
        match read_exact_or_eof(r, &mut body)? {
            ReadState::Full => {}
            _ if tolerate_torn_tail => return Ok(out),
            _ => {
                return Err(LogError::Corrupt {
                    index,
                    reason: "truncated frame body".to_string(),
                });
            }
        }
        let record = serde_json::from_slice(&body).map_err(|e| LogError::Corrupt {
            index,
            reason: format!("decode: {e}"),
        })?;
        out.push(record);
        index += 1;
    }
}

enum ReadState {
    Full,
    Partial,
    Eof,
}

fn read_exact_or_eof(r: &mut impl Read, buf: &mut [u8]) -> Result<ReadState, LogError> {
    let mut filled = 0usize;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => {
                return Ok(if filled == 0 {
                    ReadState::Eof
                } else {
                    ReadState::Partial
                });
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(ReadState::Full)
}
