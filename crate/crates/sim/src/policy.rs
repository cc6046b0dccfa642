//! Ranking policies that stand in for experimental systems.
//!
//! A policy deterministically orders a context's candidate pool. Policies
//! back both run-file generation and live stub endpoints, so the same
//! system identity behaves identically regardless of transport.

use crate::world::World;
use livelab_core::hash::fnv1a64_parts;
use livelab_core::model::{ContextId, DocId, QueryId};
use livelab_core::run::{RunSet, ScoredDoc};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum Policy {
    /// The curated candidate order, the production baseline's behavior.
    CandidateOrder,
    /// Grade-descending oracle order, ties broken by candidate position.
    RelevanceDesc,
    /// Grade-ascending order, a deliberately poor system.
    RelevanceAsc,
    /// Candidate order reversed.
    Reverse,
    /// Deterministic pseudo-random permutation keyed by the salt. Two
    /// different salts give two different but equally relevance-blind
    /// orderings.
    Shuffle { salt: String },
}

impl Policy {
    /// Orders the full candidate pool of `ctx`; empty for a context the
    /// world does not know.
    pub fn rank(&self, world: &World, ctx: &ContextId) -> Vec<DocId> {
        let Some(list) = world.candidates.get(ctx) else {
            return Vec::new();
        };
        let pool: &[DocId] = &list.candidates;
        match self {
            Policy::CandidateOrder => pool.to_vec(),
            Policy::Reverse => pool.iter().rev().cloned().collect(),
            Policy::RelevanceDesc => {
                let mut docs: Vec<(usize, DocId)> = pool.iter().cloned().enumerate().collect();
                docs.sort_by_key(|(pos, doc)| {
                    (std::cmp::Reverse(world.grade(ctx, doc)), *pos)
                });
                docs.into_iter().map(|(_, d)| d).collect()
            }
            Policy::RelevanceAsc => {
                let mut docs: Vec<(usize, DocId)> = pool.iter().cloned().enumerate().collect();
                docs.sort_by_key(|(pos, doc)| (world.grade(ctx, doc), *pos));
                docs.into_iter().map(|(_, d)| d).collect()
            }
            Policy::Shuffle { salt } => {
                let mut docs: Vec<DocId> = pool.to_vec();
                docs.sort_by_key(|doc| {
                    fnv1a64_parts(&[
                        salt.as_bytes(),
                        &[0x00],
                        ctx.as_str().as_bytes(),
                        &[0x00],
                        doc.as_str().as_bytes(),
                    ])
                });
                docs
            }
        }
    }

    /// Materializes the policy as a run set over the given queries, the
    /// form a participant would upload ahead of a cycle.
    pub fn as_run_set(&self, world: &World, queries: &[QueryId], tag: &str) -> RunSet {
        let mut rankings = BTreeMap::new();
        let mut line_count = 0usize;
        for qid in queries {
            let docs = self.rank(world, qid);
            let scored: Vec<ScoredDoc> = docs
                .into_iter()
                .enumerate()
                .map(|(idx, doc)| ScoredDoc {
                    doc,
                    score: (1000 - idx as i64) as f64,
                })
                .collect();
            line_count += scored.len();
            rankings.insert(qid.clone(), scored);
        }
        RunSet {
            tag: tag.to_string(),
            rankings,
            line_count,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::WorldSpec;

    fn world() -> World {
        World::generate(
            &WorldSpec {
                queries: 4,
                seeds: 2,
                pool: 10,
                docs: 60,
                order_noise: 1.5,
            },
            21,
        )
    }

    #[test]
    fn policies_permute_the_pool() {
        let world = world();
        for ctx in world.candidates.keys() {
            for policy in [
                Policy::CandidateOrder,
                Policy::RelevanceDesc,
                Policy::RelevanceAsc,
                Policy::Reverse,
                Policy::Shuffle {
                    salt: "x".to_string(),
                },
            ] {
                let ranked = policy.rank(&world, ctx);
                let mut sorted = ranked.clone();
                sorted.sort();
                let mut pool = world.pool(ctx).to_vec();
                pool.sort();
                assert_eq!(sorted, pool, "{policy:?} must permute the pool");
            }
        }
    }

    #[test]
    fn relevance_desc_front_loads_grades() {
        let world = world();
        for ctx in world.candidates.keys() {
            let ranked = Policy::RelevanceDesc.rank(&world, ctx);
            let grades = world.grades_of(ctx, &ranked);
            let mut sorted = grades.clone();
            sorted.sort_by(|a, b| b.cmp(a));
            assert_eq!(grades, sorted);
        }
    }

    #[test]
    fn different_salts_shuffle_differently() {
        let world = world();
        let ctx = world.query_ids()[0].clone();
        let a = Policy::Shuffle {
            salt: "a".to_string(),
        }
        .rank(&world, &ctx);
        let b = Policy::Shuffle {
            salt: "b".to_string(),
        }
        .rank(&world, &ctx);
        assert_ne!(a, b);
        // Deterministic per salt.
        let a2 = Policy::Shuffle {
            salt: "a".to_string(),
        }
        .rank(&world, &ctx);
        assert_eq!(a, a2);
    }

    #[test]
    fn run_sets_round_trip_canonically() {
        let world = world();
        let queries = world.query_ids();
        let rs = Policy::RelevanceDesc.as_run_set(&world, &queries, "oracle");
        let text = rs.to_canonical_string();
        let back = livelab_core::run::parse_run_file(&text).unwrap();
        assert_eq!(back.to_canonical_string(), text);
        assert_eq!(back.rankings.len(), queries.len());
    }
}
