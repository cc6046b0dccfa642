//! Click models: how a synthetic user reacts to a ranked list.
//!
//! Each model maps the displayed list's relevance grades to a set of
//! clicked positions, consuming randomness from the caller's stream so a
//! campaign stays reproducible end to end.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Per-grade click probability used by the relevance-driven models.
pub const CLICK_BY_GRADE: [f64; 3] = [0.05, 0.45, 0.85];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClickModel {
    /// Clicks depend on rank only: P(click at rank r) = attraction / r,
    /// independently per position. Relevance-blind by construction.
    PositionOnly { attraction: f64 },
    /// Top-down scan. The user examines rank 1, clicks with the grade's
    /// probability, and after examining each position continues to the
    /// next with probability `continuation` (clicked or not).
    Cascade { continuation: f64 },
    /// Every position clicked independently with a flat probability.
    Uniform { p: f64 },
}

impl ClickModel {
    /// Draws the set of clicked positions (0-based, ascending) for a list
    /// with the given grades.
    pub fn draw_clicks(&self, rng: &mut impl Rng, grades: &[u8]) -> Vec<usize> {
        let mut clicks = Vec::new();
        match *self {
            ClickModel::PositionOnly { attraction } => {
                for (idx, _) in grades.iter().enumerate() {
                    let p = attraction / (idx as f64 + 1.0);
                    if rng.random::<f64>() < p {
                        clicks.push(idx);
                    }
                }
            }
            ClickModel::Cascade { continuation } => {
                for (idx, &grade) in grades.iter().enumerate() {
                    let p = CLICK_BY_GRADE[usize::from(grade.min(2))];
                    if rng.random::<f64>() < p {
                        clicks.push(idx);
                    }
                    if idx + 1 < grades.len() && rng.random::<f64>() >= continuation {
                        break;
                    }
                }
            }
            ClickModel::Uniform { p } => {
                for (idx, _) in grades.iter().enumerate() {
                    if rng.random::<f64>() < p {
                        clicks.push(idx);
                    }
                }
            }
        }
        clicks
    }
}

/// Post-click behavior knobs for simulated sessions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BehaviorSpec {
    /// Probability that the final click of a panel is abandoned quickly
    /// (the next record is a near-immediate page leave).
    pub bounce_prob: f64,
    /// Probability that an engaged recommendation visit casts a vote.
    pub vote_prob: f64,
    /// P(vote is up | grade of the voted document).
    pub vote_up_by_grade: [f64; 3],
}

impl Default for BehaviorSpec {
    fn default() -> Self {
        Self {
            bounce_prob: 0.35,
            vote_prob: 0.6,
            vote_up_by_grade: [0.15, 0.6, 0.92],
        }
    }
}
