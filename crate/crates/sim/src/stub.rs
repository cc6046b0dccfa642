//! Stand-in experimental systems backed by a ranking policy.
//!
//! Both flavours answer from the same [`Policy`] so a campaign can swap the
//! transport without changing what the system would have returned. Fault
//! injection is deterministic: each stub owns a seeded RNG and draws one
//! number per request, so a given seed produces the same fault schedule
//! regardless of request timing.

use crate::policy::Policy;
use crate::world::World;
use livelab_app::{BoxFuture, EndpointError, SystemEndpoint};
use livelab_core::hash::fnv1a64_parts;
use livelab_core::model::{ContextId, DocId, QueryId, SeedId, SystemId};
use livelab_core::wire::ItemListResponse;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::{Arc, Mutex};
use std::time::Duration;

/// How unreliable a stub system should act.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FaultSpec {
    /// Probability that a request stalls past the caller's deadline.
    pub timeout_prob: f64,
    /// Fixed extra latency added to every non-stalled answer.
    pub extra_delay_ms: u64,
}

/// A policy-backed system reachable as an in-process endpoint.
pub struct PolicyEndpoint {
    policy: Policy,
    world: Arc<World>,
    fault: FaultSpec,
    /// Deadline the caller is known to enforce; a stall sleeps past it.
    deadline: Duration,
    rng: Mutex<ChaCha8Rng>,
}

impl PolicyEndpoint {
    pub fn new(
        policy: Policy,
        world: Arc<World>,
        fault: FaultSpec,
        deadline: Duration,
        seed: u64,
        system_id: &SystemId,
    ) -> Self {
        // Each system gets its own stream so adding a stub does not shift
        // the fault schedule of the others.
        let stream = fnv1a64_parts(&[&seed.to_le_bytes(), system_id.as_str().as_bytes()]);
        PolicyEndpoint {
            policy,
            world,
            fault,
            deadline,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(stream)),
        }
    }

    /// Draws the delay for one request. The lock is released before any
    /// sleeping so concurrent requests stay independent.
    fn stall_for(&self) -> Option<Duration> {
        let mut rng = self.rng.lock().expect("fault rng poisoned");
        if rng.random::<f64>() < self.fault.timeout_prob {
            Some(self.deadline + Duration::from_millis(150))
        } else if self.fault.extra_delay_ms > 0 {
            Some(Duration::from_millis(self.fault.extra_delay_ms))
        } else {
            None
        }
    }

    async fn answer(&self, ctx: &ContextId) -> Result<Vec<DocId>, EndpointError> {
        if let Some(pause) = self.stall_for() {
            tokio::time::sleep(pause).await;
        }
        Ok(self.policy.rank(&self.world, ctx))
    }
}

impl SystemEndpoint for PolicyEndpoint {
    fn fetch_ranking<'a>(
        &'a self,
        _query_text: &'a str,
        qid: &'a QueryId,
    ) -> BoxFuture<'a, Result<Vec<DocId>, EndpointError>> {
        Box::pin(self.answer(qid))
    }

    fn fetch_recommendation<'a>(
        &'a self,
        item_id: &'a SeedId,
    ) -> BoxFuture<'a, Result<Vec<DocId>, EndpointError>> {
        Box::pin(self.answer(item_id))
    }

    fn liveness<'a>(&'a self) -> BoxFuture<'a, Result<(), EndpointError>> {
        Box::pin(async { Ok(()) })
    }
}

/// Serves a [`PolicyEndpoint`] over HTTP using the item-list protocol.
///
/// Returns the base URL and the server task handle; dropping the handle by
/// aborting it stops the stub.
pub async fn spawn_stub_system(
    endpoint: Arc<PolicyEndpoint>,
) -> std::io::Result<(String, tokio::task::JoinHandle<()>)> {
    use axum::extract::{Query, State};
    use axum::http::StatusCode;
    use axum::routing::get;
    use axum::{Json, Router};
    use serde::Deserialize;

    #[derive(Deserialize)]
    struct RankingParams {
        #[allow(dead_code)]
        query: Option<String>,
        qid: String,
    }

    #[derive(Deserialize)]
    struct RecParams {
        item_id: String,
    }

    async fn ranking(
        State(endpoint): State<Arc<PolicyEndpoint>>,
        Query(params): Query<RankingParams>,
    ) -> Result<Json<ItemListResponse>, StatusCode> {
        let qid = ContextId::new(params.qid).map_err(|_| StatusCode::BAD_REQUEST)?;
        let itemlist = endpoint
            .answer(&qid)
            .await
            .map_err(|_| StatusCode::INTERNAL_SERVER_ERROR)?;
        Ok(Json(ItemListResponse { itemlist }))
    }

    async fn recommendation(
        State(endpoint): State<Arc<PolicyEndpoint>>,
        Query(params): Query<RecParams>,
    ) -> Result<Json<ItemListResponse>, StatusCode> {
        let seed = ContextId::new(params.item_id).map_err(|_| StatusCode::BAD_REQUEST)?;
        let itemlist = endpoint
            .answer(&seed)
            .await
            .map_err(|_| StatusCode::INTERNAL_SERVER_ERROR)?;
        Ok(Json(ItemListResponse { itemlist }))
    }

    async fn liveness() -> StatusCode {
        StatusCode::OK
    }

    let router = Router::new()
        .route("/ranking", get(ranking))
        .route("/recommendation/datasets", get(recommendation))
        .route("/test", get(liveness))
        .with_state(endpoint);

    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    let handle = tokio::spawn(async move {
        let _ = axum::serve(listener, router).await;
    });
    Ok((format!("http://{addr}"), handle))
}
