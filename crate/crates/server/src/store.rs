//! Snapshot intake with exactly-once application per app sequence.
//!
//! Segments may arrive duplicated, reordered, or with gaps (apps retry
//! failed uploads). Each app's segments are applied strictly in sequence:
//! a duplicate is acknowledged and dropped, a future segment is parked
//! until the gap closes, and only contiguous application mutates the
//! aggregate logs. The aggregate is therefore independent of arrival
//! order.

use livelab_core::log::{
    read_frames_lossy, write_frame, EventLogRecord, OutcomeRecord, Segment,
};
use livelab_core::model::AppId;
use livelab_core::wire::{SnapshotAck, SnapshotStatus};
use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write as _};
use std::path::Path;

pub const SEGMENTS_FILE: &str = "segments.log";

#[derive(Default)]
struct PerApp {
    applied_through: u64,
    parked: BTreeMap<u64, Segment>,
}

/// Ordered, deduplicated segment intake feeding the aggregate logs.
#[derive(Default)]
pub struct SegmentStore {
    apps: BTreeMap<AppId, PerApp>,
    events: Vec<EventLogRecord>,
    outcomes: Vec<OutcomeRecord>,
    segments_applied: u64,
    /// Applied segments are journaled here in application order.
    journal: Option<BufWriter<File>>,
}

impl SegmentStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens a store journaled under `dir`, re-applying any segments a
    /// previous process accepted.
    pub fn open(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(SEGMENTS_FILE);
        let mut store = Self::default();
        if path.exists() {
            let bytes = std::fs::read(&path)?;
            let segments: Vec<Segment> = read_frames_lossy(&mut bytes.as_slice())
                .map_err(|e| std::io::Error::other(e.to_string()))?;
            for segment in segments {
                store.ingest(segment);
            }
        }
        store.journal = Some(BufWriter::new(
            OpenOptions::new().create(true).append(true).open(&path)?,
        ));
        Ok(store)
    }

    /// Applies, parks, or drops one incoming segment.
    pub fn ingest(&mut self, segment: Segment) -> SnapshotAck {
        let app_id = segment.app_id.clone();
        let seq = segment.seq;
        let state = self.apps.entry(app_id.clone()).or_default();

        if seq <= state.applied_through {
            return SnapshotAck {
                app_id,
                seq,
                status: SnapshotStatus::Duplicate,
                applied_through: state.applied_through,
            };
        }
        if seq > state.applied_through + 1 {
            // Parking twice under the same seq keeps the first copy.
            state.parked.entry(seq).or_insert(segment);
            return SnapshotAck {
                app_id,
                seq,
                status: SnapshotStatus::Parked,
                applied_through: state.applied_through,
            };
        }

        self.apply(segment);
        // The gap may have closed; drain every now-contiguous parked
        // segment in order.
        loop {
            let state = self.apps.get_mut(&app_id).expect("state created above");
            let next = state.applied_through + 1;
            match state.parked.remove(&next) {
                Some(parked) => self.apply(parked),
                None => break,
            }
        }
        let state = self.apps.get(&app_id).expect("state created above");
        SnapshotAck {
            app_id,
            seq,
            status: SnapshotStatus::Applied,
            applied_through: state.applied_through,
        }
    }

    fn apply(&mut self, segment: Segment) {
        if let Some(journal) = &mut self.journal {
            // Journal faults must not corrupt the in-memory aggregate;
            // the operator sees the error and restarts from the journal.
            if let Err(e) = write_frame(journal, &segment).and_then(|()| Ok(journal.flush()?)) {
                tracing::error!(%e, "segment journal write failed");
            }
        }
        let state = self
            .apps
            .get_mut(&segment.app_id)
            .expect("ingest creates the app state");
        debug_assert_eq!(segment.seq, state.applied_through + 1);
        state.applied_through = segment.seq;
        self.events.extend(segment.events);
        self.outcomes.extend(segment.outcomes);
        self.segments_applied += 1;
    }

    pub fn events(&self) -> &[EventLogRecord] {
        &self.events
    }

    pub fn outcomes(&self) -> &[OutcomeRecord] {
        &self.outcomes
    }

    pub fn segments_applied(&self) -> u64 {
        self.segments_applied
    }

    /// Sequences parked past a gap, per app. Diagnostic surface.
    pub fn parked(&self) -> BTreeMap<AppId, Vec<u64>> {
        self.apps
            .iter()
            .filter(|(_, s)| !s.parked.is_empty())
            .map(|(app, s)| (app.clone(), s.parked.keys().copied().collect()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use livelab_core::model::{
        EventId, EventKind, FeedbackEvent, ImpressionId, SessionId, TimestampMs,
    };

    fn segment(app: &str, seq: u64) -> Segment {
        let event = FeedbackEvent {
            event_id: EventId::new(format!("{app}-{seq}")).unwrap(),
            session_id: SessionId::new("s1").unwrap(),
            impression_id: ImpressionId::new("imp-1").unwrap(),
            kind: EventKind::PageLeave,
            position: None,
            doc: None,
            at: TimestampMs(seq as i64),
        };
        Segment {
            app_id: AppId::new(app).unwrap(),
            seq,
            events: vec![EventLogRecord::Feedback(event)],
            outcomes: vec![],
        }
    }

    #[test]
    fn in_order_segments_apply_directly() {
        let mut store = SegmentStore::in_memory();
        for seq in 1..=3 {
            let ack = store.ingest(segment("a", seq));
            assert_eq!(ack.status, SnapshotStatus::Applied);
            assert_eq!(ack.applied_through, seq);
        }
        assert_eq!(store.events().len(), 3);
        assert_eq!(store.segments_applied(), 3);
    }

    #[test]
    fn duplicates_are_dropped() {
        let mut store = SegmentStore::in_memory();
        store.ingest(segment("a", 1));
        let ack = store.ingest(segment("a", 1));
        assert_eq!(ack.status, SnapshotStatus::Duplicate);
        assert_eq!(store.events().len(), 1);
    }

    #[test]
    fn gaps_park_until_closed() {
        let mut store = SegmentStore::in_memory();
        let ack = store.ingest(segment("a", 3));
        assert_eq!(ack.status, SnapshotStatus::Parked);
        assert_eq!(ack.applied_through, 0);
        assert_eq!(store.events().len(), 0);

        store.ingest(segment("a", 2));
        assert_eq!(store.events().len(), 0, "2 still waits for 1");
        assert_eq!(store.parked()[&AppId::new("a").unwrap()], vec![2, 3]);

        let ack = store.ingest(segment("a", 1));
        assert_eq!(ack.status, SnapshotStatus::Applied);
        assert_eq!(ack.applied_through, 3);
        assert_eq!(store.events().len(), 3);
        assert!(store.parked().is_empty());
    }

    #[test]
    fn apps_are_sequenced_independently() {
        let mut store = SegmentStore::in_memory();
        store.ingest(segment("a", 1));
        let ack = store.ingest(segment("b", 1));
        assert_eq!(ack.status, SnapshotStatus::Applied);
        assert_eq!(store.events().len(), 2);
    }

    #[test]
    fn shuffled_intake_equals_ordered_intake() {
        let order = [4u64, 1, 3, 1, 5, 2, 4];
        let mut shuffled = SegmentStore::in_memory();
        for seq in order {
            shuffled.ingest(segment("a", seq));
        }
        let mut ordered = SegmentStore::in_memory();
        for seq in 1..=5 {
            ordered.ingest(segment("a", seq));
        }
        assert_eq!(shuffled.events(), ordered.events());
        assert_eq!(shuffled.segments_applied(), ordered.segments_applied());
    }

    #[test]
    fn journal_restores_state_across_restarts() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut store = SegmentStore::open(dir.path()).unwrap();
            store.ingest(segment("a", 1));
            store.ingest(segment("a", 2));
        }
        let mut store = SegmentStore::open(dir.path()).unwrap();
        assert_eq!(store.events().len(), 2);
        let ack = store.ingest(segment("a", 2));
        assert_eq!(ack.status, SnapshotStatus::Duplicate);
        let ack = store.ingest(segment("a", 3));
        assert_eq!(ack.status, SnapshotStatus::Applied);
    }
}
