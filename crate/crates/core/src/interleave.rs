//! Team-draft interleaving and credit assignment.
//!
//! One experimental ranking is merged with the production baseline ranking in
//! draft rounds: a coin decides which team picks first, then each team
//! appends its highest-ranked document not already in the output and labels
//! it with its team. Clicks on the merged list are credited to the owning
//! team, giving a win, loss, or tie per impression.
//!
//! Drafting stops at the target length or as soon as either input has no
//! unpicked document left, which keeps team exposure balanced within one
//! item. The coin stream is supplied by the caller; serving code derives it
//! deterministically from the impression id so every impression can be
//! replayed bit-for-bit.

use crate::hash::fnv1a64;
use crate::model::{ContextId, DocId, ImpressionId, Outcome, Ranking, SystemId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

/// Which side of the experiment a drafted document belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeamLabel {
    Baseline,
    Experimental,
}

/// One document in an interleaved list together with its team attribution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDoc {
    pub doc: DocId,
    pub team: TeamLabel,
}

/// One served interleaved list. Team labels and the coin trace stay
/// server-side; the public payload carries only the documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterleavedImpression {
    pub impression_id: ImpressionId,
    pub context: ContextId,
    pub items: Vec<LabeledDoc>,
    /// One boolean per coin-flipped draft round; `true` means the baseline
    /// team picked first.
    pub coin_trace: Vec<bool>,
    pub source_baseline: SystemId,
    pub source_experimental: SystemId,
    pub target_length: usize,
}

impl InterleavedImpression {
    pub fn docs(&self) -> impl Iterator<Item = &DocId> {
        self.items.iter().map(|item| &item.doc)
    }

    pub fn contains(&self, doc: &DocId) -> bool {
        self.items.iter().any(|item| &item.doc == doc)
    }

    pub fn team_of(&self, doc: &DocId) -> Option<TeamLabel> {
        self.items
            .iter()
            .find(|item| &item.doc == doc)
            .map(|item| item.team)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InterleaveError {
    #[error("rankings concern different contexts: {0} vs {1}")]
    ContextMismatch(ContextId, ContextId),
    #[error("clicked document {0} is not part of the impression")]
    UnknownClickedDoc(DocId),
}

/// Merges `baseline` and `experimental` by team drafting.
///
/// `coins` must yield one boolean per coin-flipped round (`true` = baseline
/// first). Identical inputs and coins produce identical output.
pub fn team_draft_interleave(
    impression_id: ImpressionId,
    baseline: &Ranking,
    experimental: &Ranking,
    target_length: usize,
    mut coins: impl FnMut() -> bool,
) -> Result<InterleavedImpression, InterleaveError> {
    if baseline.context != experimental.context {
        return Err(InterleaveError::ContextMismatch(
            baseline.context.clone(),
            experimental.context.clone(),
        ));
    }

    let mut items: Vec<LabeledDoc> = Vec::with_capacity(target_length.min(64));
    let mut coin_trace = Vec::new();
    let mut picked: HashSet<&DocId> = HashSet::new();
    // Cursor into each input list, advanced past documents already drafted.
    let mut cursor_b = 0usize;
    let mut cursor_e = 0usize;

    let advance = |cursor: &mut usize, list: &[DocId], picked: &HashSet<&DocId>| {
        while *cursor < list.len() && picked.contains(&list[*cursor]) {
            *cursor += 1;
        }
    };

    'rounds: while items.len() < target_length {
        advance(&mut cursor_b, &baseline.items, &picked);
        advance(&mut cursor_e, &experimental.items, &picked);
        if cursor_b >= baseline.items.len() || cursor_e >= experimental.items.len() {
            // One side is exhausted: stop rather than drain the other side,
            // otherwise team exposure (and credit) would skew.
            break;
        }

        let baseline_first = coins();
        coin_trace.push(baseline_first);
        let order = if baseline_first {
            [TeamLabel::Baseline, TeamLabel::Experimental]
        } else {
            [TeamLabel::Experimental, TeamLabel::Baseline]
        };

        for team in order {
            if items.len() >= target_length {
                break 'rounds;
            }
            let (cursor, list) = match team {
                TeamLabel::Baseline => (&mut cursor_b, &baseline.items),
                TeamLabel::Experimental => (&mut cursor_e, &experimental.items),
            };
            advance(cursor, list, &picked);
            if *cursor < list.len() {
                let doc = &list[*cursor];
                picked.insert(doc);
                items.push(LabeledDoc {
                    doc: doc.clone(),
                    team,
                });
            }
        }
    }

    Ok(InterleavedImpression {
        impression_id,
        context: baseline.context.clone(),
        items,
        coin_trace,
        source_baseline: baseline.source.clone(),
        source_experimental: experimental.source.clone(),
        target_length,
    })
}

/// A deterministic coin stream keyed by the impression id, for replayable
/// serving.
pub fn coins_for_impression(impression_id: &ImpressionId) -> impl FnMut() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64(impression_id.as_str().as_bytes()));
    move || rng.random()
}

/// A coin stream reading from a fixed bit sequence; panics when the sequence
/// runs out. Intended for tests and replay harnesses.
pub fn coins_from_bits(bits: &[bool]) -> impl FnMut() -> bool + '_ {
    let mut iter = bits.iter().copied();
    move || iter.next().expect("coin sequence exhausted")
}

/// Credits the deduplicated set of clicked documents to their teams.
///
/// More experimental clicks win the impression for the experimental side,
/// more baseline clicks for the baseline, and equal counts (including zero
/// clicks) tie.
pub fn credit(
    impression: &InterleavedImpression,
    clicks: &HashSet<DocId>,
) -> Result<Outcome, InterleaveError> {
    for doc in clicks {
        if !impression.contains(doc) {
            return Err(InterleaveError::UnknownClickedDoc(doc.clone()));
        }
    }
    let mut baseline = 0usize;
    let mut experimental = 0usize;
    for item in &impression.items {
        if clicks.contains(&item.doc) {
            match item.team {
                TeamLabel::Baseline => baseline += 1,
                TeamLabel::Experimental => experimental += 1,
            }
        }
    }
    Ok(match experimental.cmp(&baseline) {
        std::cmp::Ordering::Greater => Outcome::WinExperimental,
        std::cmp::Ordering::Less => Outcome::WinBaseline,
        std::cmp::Ordering::Equal => Outcome::Tie,
    })
}

/// Win/loss/tie tallies from the experimental side's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceTally {
    pub wins: u64,
    pub losses: u64,
    pub ties: u64,
    /// `wins / (wins + losses)`; 0.5 when no impression was informative.
    pub preference_score: f64,
}

impl PreferenceTally {
    pub fn informative(&self) -> u64 {
        self.wins + self.losses
    }
}

/// Aggregates per-impression outcomes into a preference tally.
pub fn aggregate_preference(outcomes: impl IntoIterator<Item = Outcome>) -> PreferenceTally {
    let (mut wins, mut losses, mut ties) = (0u64, 0u64, 0u64);
    for outcome in outcomes {
        match outcome {
            Outcome::WinExperimental => wins += 1,
            Outcome::WinBaseline => losses += 1,
            Outcome::Tie => ties += 1,
        }
    }
    PreferenceTally {
        wins,
        losses,
        ties,
        preference_score: preference_score(wins, losses),
    }
}

/// `wins / (wins + losses)`, defaulting to indifference on no data.
pub fn preference_score(wins: u64, losses: u64) -> f64 {
    if wins + losses == 0 {
        0.5
    } else {
        wins as f64 / (wins + losses) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(s: &str) -> DocId {
        DocId::new(s).unwrap()
    }

    fn ranking(sys: &str, docs: &[&str]) -> Ranking {
        Ranking::new(
            ContextId::new("q1").unwrap(),
            docs.iter().map(|d| doc(d)).collect(),
            SystemId::new(sys).unwrap(),
        )
        .unwrap()
    }

    fn imp_id() -> ImpressionId {
        ImpressionId::new("imp-1").unwrap()
    }

    fn interleave(a: &Ranking, b: &Ranking, target: usize, bits: &[bool]) -> InterleavedImpression {
        team_draft_interleave(imp_id(), a, b, target, coins_from_bits(bits)).unwrap()
    }

    #[test]
    fn identical_inputs_keep_order() {
        let a = ranking("base", &["d1", "d2", "d3"]);
        let b = ranking("exp", &["d1", "d2", "d3"]);
        let winner = |coin: bool| {
            if coin {
                TeamLabel::Baseline
            } else {
                TeamLabel::Experimental
            }
        };
        let loser = |coin: bool| winner(!coin);
        for bits in [[true, true], [false, true], [false, false]] {
            let imp = interleave(&a, &b, 3, &bits);
            let docs: Vec<_> = imp.docs().map(|d| d.as_str().to_string()).collect();
            assert_eq!(docs, ["d1", "d2", "d3"]);
            // Each round drafts two documents, round winner first; the
            // final round is cut short by the target length.
            let teams: Vec<_> = imp.items.iter().map(|i| i.team).collect();
            assert_eq!(teams, [winner(bits[0]), loser(bits[0]), winner(bits[1])]);
            assert_eq!(imp.coin_trace, bits);
        }
    }

    #[test]
    fn one_round_hand_trace() {
        // Baseline picks x first; experimental's top pick y is still free.
        let a = ranking("base", &["x", "y"]);
        let b = ranking("exp", &["y", "x"]);
        let imp = interleave(&a, &b, 2, &[true]);
        assert_eq!(
            imp.items,
            vec![
                LabeledDoc {
                    doc: doc("x"),
                    team: TeamLabel::Baseline
                },
                LabeledDoc {
                    doc: doc("y"),
                    team: TeamLabel::Experimental
                },
            ]
        );
        assert_eq!(imp.coin_trace, vec![true]);
    }

    #[test]
    fn truncation_at_target_length() {
        let a = ranking("base", &["a1", "a2", "a3"]);
        let b = ranking("exp", &["b1", "b2", "b3"]);
        let imp = interleave(&a, &b, 3, &[true, false]);
        assert_eq!(imp.items.len(), 3);
        let teams: Vec<_> = imp.items.iter().map(|i| i.team).collect();
        // Round 1: baseline, experimental. Round 2: experimental first, then cut.
        assert_eq!(
            teams,
            vec![
                TeamLabel::Baseline,
                TeamLabel::Experimental,
                TeamLabel::Experimental
            ]
        );
    }

    #[test]
    fn stops_when_one_side_is_exhausted() {
        let a = ranking("base", &["x"]);
        let b = ranking("exp", &["y", "z", "w"]);
        let imp = interleave(&a, &b, 10, &[true, true, true]);
        // One complete round, then the baseline side has nothing left.
        assert_eq!(imp.items.len(), 2);
        let baseline = imp
            .items
            .iter()
            .filter(|i| i.team == TeamLabel::Baseline)
            .count();
        let experimental = imp.items.len() - baseline;
        assert!(baseline.abs_diff(experimental) <= 1);
    }

    #[test]
    fn context_mismatch_is_rejected() {
        let a = ranking("base", &["x"]);
        let mut b = ranking("exp", &["y"]);
        b.context = ContextId::new("q2").unwrap();
        let err = team_draft_interleave(imp_id(), &a, &b, 2, coins_from_bits(&[true]));
        assert!(matches!(err, Err(InterleaveError::ContextMismatch(..))));
    }

    #[test]
    fn deterministic_coin_stream() {
        let id = ImpressionId::new("imp-42").unwrap();
        let mut c1 = coins_for_impression(&id);
        let mut c2 = coins_for_impression(&id);
        let s1: Vec<bool> = (0..32).map(|_| c1()).collect();
        let s2: Vec<bool> = (0..32).map(|_| c2()).collect();
        assert_eq!(s1, s2);
        assert!(s1.iter().any(|&b| b) && s1.iter().any(|&b| !b));
    }

    #[test]
    fn credit_cases() {
        let a = ranking("base", &["a1", "a2"]);
        let b = ranking("exp", &["b1", "b2"]);
        let imp = interleave(&a, &b, 4, &[true, false]);

        let exp_docs: HashSet<DocId> = imp
            .items
            .iter()
            .filter(|i| i.team == TeamLabel::Experimental)
            .map(|i| i.doc.clone())
            .collect();
        assert_eq!(credit(&imp, &exp_docs).unwrap(), Outcome::WinExperimental);

        assert_eq!(credit(&imp, &HashSet::new()).unwrap(), Outcome::Tie);

        let all_docs: HashSet<DocId> = imp.docs().cloned().collect();
        assert_eq!(credit(&imp, &all_docs).unwrap(), Outcome::Tie);

        let stranger: HashSet<DocId> = [doc("zz")].into();
        assert_eq!(
            credit(&imp, &stranger),
            Err(InterleaveError::UnknownClickedDoc(doc("zz")))
        );
    }

    #[test]
    fn aggregate_preference_cases() {
        let tally = aggregate_preference([
            Outcome::WinExperimental,
            Outcome::WinBaseline,
            Outcome::Tie,
        ]);
        assert_eq!((tally.wins, tally.losses, tally.ties), (1, 1, 1));
        assert_eq!(tally.preference_score, 0.5);

        let empty = aggregate_preference([]);
        assert_eq!((empty.wins, empty.losses, empty.ties), (0, 0, 0));
        assert_eq!(empty.preference_score, 0.5);

        let wins = aggregate_preference([Outcome::WinExperimental; 3]);
        assert_eq!(wins.preference_score, 1.0);
    }
}
