//! Wire-level exercise of the public app API over a real socket.

use livelab_app::core::{AdhocLane, AppSetup, RecLane};
use livelab_app::http::AppState;
use livelab_app::{AppCore, LogStore, SystemSource};
use livelab_core::assign::ExperimentConfig;
use livelab_core::model::{AppId, ContextId, DocId, SystemId, Task};
use livelab_core::run::CandidateList;
use livelab_core::wire::{FeedbackAck, RankingPayload, RecommendationPayload};
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

fn docs(names: &[&str]) -> Vec<DocId> {
    names.iter().map(|n| DocId::new(*n).unwrap()).collect()
}

fn test_core() -> AppCore {
    let run = livelab_core::run::parse_run_file(
        "q1 Q0 d5 1 3.0 xrun\nq1 Q0 d4 2 2.0 xrun\nq1 Q0 d3 3 1.0 xrun\n",
    )
    .unwrap();
    let mut sources = HashMap::new();
    sources.insert(
        SystemId::new("base").unwrap(),
        SystemSource::CandidateOrder,
    );
    sources.insert(SystemId::new("xrun").unwrap(), SystemSource::Run(run));
    sources.insert(
        SystemId::new("rec-base").unwrap(),
        SystemSource::CandidateOrder,
    );

    let mut candidates = BTreeMap::new();
    for (ctx, pool) in [
        ("q1", vec!["d1", "d2", "d3", "d4", "d5"]),
        ("seed1", vec!["r1", "r2", "r3", "r4"]),
        ("seed-thin", vec!["r1", "r2"]),
    ] {
        let context = ContextId::new(ctx).unwrap();
        candidates.insert(
            context.clone(),
            CandidateList {
                context,
                candidates: docs(&pool),
            },
        );
    }

    AppCore::new(AppSetup {
        app_id: AppId::new("t1").unwrap(),
        sources,
        adhoc: Some(AdhocLane {
            baseline: SystemId::new("base").unwrap(),
            arms: vec![SystemId::new("xrun").unwrap()],
        }),
        recommendation: Some(RecLane {
            cfg: ExperimentConfig::new(
                "cycle",
                Task::Recommendation,
                vec![SystemId::new("rec-base").unwrap()],
                "salt",
            )
            .unwrap(),
            baseline: SystemId::new("rec-base").unwrap(),
        }),
        candidates,
        queries: [(ContextId::new("q1").unwrap(), "solar cells".to_string())].into(),
        endpoint_deadline: livelab_app::DEFAULT_ENDPOINT_DEADLINE,
        target_length: 5,
        logs: LogStore::in_memory(),
    })
    .unwrap()
}

async fn spawn_app() -> String {
    let state = Arc::new(AppState {
        core: Arc::new(test_core()),
        sink: None,
    });
    let router = livelab_app::http::router(state);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, router).await.unwrap();
    });
    format!("http://{addr}")
}

#[tokio::test]
async fn public_api_round_trip() {
    let base = spawn_app().await;
    let client = reqwest::Client::new();

    let health: serde_json::Value = client
        .get(format!("{base}/healthz"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(health["status"], "ok");

    // Ranking by registered query text; payload must stay blind.
    let response = client
        .get(format!(
            "{base}/ranking?session_id=s1&query=solar%20cells&at=1000"
        ))
        .send()
        .await
        .unwrap();
    assert!(response.status().is_success());
    let text = response.text().await.unwrap();
    assert!(!text.contains("team") && !text.contains("arm") && !text.contains("baseline"));
    let payload: RankingPayload = serde_json::from_str(&text).unwrap();
    assert_eq!(payload.query_id.as_str(), "q1");
    assert!(!payload.items.is_empty());

    // Click the first item, then repeat the same event id.
    let click = serde_json::json!({
        "event_id": "e1",
        "session_id": "s1",
        "impression_id": payload.impression_id.as_str(),
        "kind": "click",
        "position": 1,
        "doc": payload.items[0].as_str(),
        "at": 2000,
    });
    let ack: FeedbackAck = client
        .post(format!("{base}/feedback"))
        .json(&click)
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(ack.status, livelab_core::wire::AckStatus::Recorded);
    let ack: FeedbackAck = client
        .post(format!("{base}/feedback"))
        .json(&click)
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(ack.status, livelab_core::wire::AckStatus::Duplicate);

    // Feedback against an unknown impression is a 404.
    let bad = serde_json::json!({
        "event_id": "e2",
        "session_id": "s1",
        "impression_id": "imp-nope",
        "kind": "page_leave",
        "at": 3000,
    });
    let status = client
        .post(format!("{base}/feedback"))
        .json(&bad)
        .send()
        .await
        .unwrap()
        .status();
    assert_eq!(status.as_u16(), 404);

    // Recommendation panel and the thin-pool skip.
    let rec: RecommendationPayload = client
        .get(format!(
            "{base}/recommendation/datasets?session_id=s1&item_id=seed1&at=4000"
        ))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(rec.items.len(), 4);
    assert!(rec.impression_id.is_some());

    let skip: RecommendationPayload = client
        .get(format!(
            "{base}/recommendation/datasets?session_id=s1&item_id=seed-thin&at=5000"
        ))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert!(skip.is_skipped());

    // No aggregation server configured: snapshot reports the conflict.
    let status = client
        .post(format!("{base}/internal/snapshot"))
        .send()
        .await
        .unwrap()
        .status();
    assert_eq!(status.as_u16(), 409);
}

#[tokio::test]
async fn malformed_query_parameters_are_client_errors() {
    let base = spawn_app().await;
    let client = reqwest::Client::new();

    // Missing session id.
    let status = client
        .get(format!("{base}/ranking?query=solar%20cells"))
        .send()
        .await
        .unwrap()
        .status();
    assert!(status.is_client_error());

    // Session token with forbidden characters.
    let status = client
        .get(format!("{base}/ranking?session_id=a%20b&qid=q1"))
        .send()
        .await
        .unwrap()
        .status();
    assert_eq!(status.as_u16(), 400);

    // Unregistered free-text query cannot be resolved.
    let status = client
        .get(format!("{base}/ranking?session_id=s1&query=unknown%20text"))
        .send()
        .await
        .unwrap()
        .status();
    assert_eq!(status.as_u16(), 400);
}
