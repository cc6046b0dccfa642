//! End-to-end exercise of the server API over a real socket.

use livelab_core::log::{EventLogRecord, ImpressionRecord, Segment, Serving};
use livelab_core::metrics::MetricsOptions;
use livelab_core::model::{
    AppId, ContextId, DocId, ImpressionId, SessionId, SystemId, SystemKind, Task, TimestampMs,
};
use livelab_core::run::parse_candidates;
use livelab_core::wire::{SnapshotAck, SnapshotStatus};
use livelab_server::ServerCore;
use std::collections::HashMap;
use std::sync::Arc;

async fn spawn_server() -> String {
    let mut tokens = HashMap::new();
    tokens.insert("tok-a".to_string(), "team-a".to_string());
    tokens.insert("tok-site".to_string(), "site-1".to_string());
    let candidates = parse_candidates("q1\td1 d2 d3\n").unwrap();
    let core = ServerCore::new(tokens, candidates, MetricsOptions::default(), None).unwrap();
    let router = livelab_server::http::router(Arc::new(core));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, router).await.unwrap();
    });
    format!("http://{addr}")
}

fn impression_segment(seq: u64, at: i64) -> Segment {
    let record = ImpressionRecord {
        impression_id: ImpressionId::new(format!("imp-x-{seq}")).unwrap(),
        session_id: SessionId::new(format!("s{seq}")).unwrap(),
        task: Task::Adhoc,
        context: ContextId::new("q1").unwrap(),
        arm: SystemId::new("sys-a").unwrap(),
        fallback: false,
        at: TimestampMs(at),
        serving: Serving::Panel {
            served_by: SystemId::new("sys-a").unwrap(),
            items: vec![DocId::new("d1").unwrap()],
        },
    };
    Segment {
        app_id: AppId::new("site-1").unwrap(),
        seq,
        events: vec![EventLogRecord::Impression(record)],
        outcomes: vec![],
    }
}

#[tokio::test]
async fn registry_flow_over_the_wire() {
    let base = spawn_server().await;
    let client = reqwest::Client::new();

    // No token: refused.
    let status = client
        .get(format!("{base}/api/systems"))
        .send()
        .await
        .unwrap()
        .status();
    assert_eq!(status.as_u16(), 401);

    // Register a run-backed system.
    let record = serde_json::json!({
        "system_id": "sys-a",
        "kind": "run_backed",
        "task": "adhoc",
        "run_ref": "upload",
    });
    let response = client
        .post(format!("{base}/api/systems"))
        .bearer_auth("tok-a")
        .json(&record)
        .send()
        .await
        .unwrap();
    assert_eq!(response.status().as_u16(), 201);
    let entry: serde_json::Value = response.json().await.unwrap();
    assert_eq!(entry["status"], "submitted");
    assert_eq!(entry["participant"], "team-a");

    // Upload a valid run; the system becomes validated.
    let outcome: serde_json::Value = client
        .put(format!("{base}/api/systems/sys-a/run"))
        .bearer_auth("tok-a")
        .body("q1 Q0 d2 1 2.0 sysa\nq1 Q0 d1 2 1.0 sysa\n")
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(outcome["accepted"], true, "report: {}", outcome["report"]);
    assert_eq!(outcome["status"], "validated");

    // Another participant cannot mutate it.
    let status = client
        .put(format!("{base}/api/systems/sys-a/status"))
        .bearer_auth("tok-site")
        .json(&serde_json::json!({"status": "live"}))
        .send()
        .await
        .unwrap()
        .status();
    assert_eq!(status.as_u16(), 403);

    // The owner takes it live; apps can download the canonical run.
    let entry: serde_json::Value = client
        .put(format!("{base}/api/systems/sys-a/status"))
        .bearer_auth("tok-a")
        .json(&serde_json::json!({"status": "live"}))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(entry["status"], "live");

    let run = client
        .get(format!("{base}/api/systems/sys-a/run"))
        .bearer_auth("tok-site")
        .send()
        .await
        .unwrap()
        .text()
        .await
        .unwrap();
    assert_eq!(run, "q1 Q0 d2 1 2 sysa\nq1 Q0 d1 2 1 sysa\n");
}

#[tokio::test]
async fn snapshots_dedupe_and_feed_the_report() {
    let base = spawn_server().await;
    let client = reqwest::Client::new();

    let post = |segment: Segment| {
        let client = client.clone();
        let url = format!("{base}/api/snapshots");
        async move {
            client
                .post(&url)
                .bearer_auth("tok-site")
                .json(&segment)
                .send()
                .await
                .unwrap()
                .json::<SnapshotAck>()
                .await
                .unwrap()
        }
    };

    // Out of order with a duplicate: 2 parks, 1 applies both, 2 dupes.
    let ack = post(impression_segment(2, 2_000)).await;
    assert_eq!(ack.status, SnapshotStatus::Parked);
    let ack = post(impression_segment(1, 1_000)).await;
    assert_eq!(ack.status, SnapshotStatus::Applied);
    assert_eq!(ack.applied_through, 2);
    let ack = post(impression_segment(2, 2_000)).await;
    assert_eq!(ack.status, SnapshotStatus::Duplicate);

    // Unauthenticated snapshot upload is refused.
    let status = client
        .post(format!("{base}/api/snapshots"))
        .json(&impression_segment(3, 3_000))
        .send()
        .await
        .unwrap()
        .status();
    assert_eq!(status.as_u16(), 401);

    // The public report reflects exactly the applied segments.
    let report: serde_json::Value = client
        .get(format!("{base}/api/report"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(report["segments_applied"], 2);
    assert_eq!(report["as_of_ms"], 2_000);

    let text = client
        .get(format!("{base}/report.txt"))
        .send()
        .await
        .unwrap()
        .text()
        .await
        .unwrap();
    assert!(text.contains("segments applied: 2"), "report:\n{text}");
}
