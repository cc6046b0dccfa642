//! Session-keyed A/B assignment.
//!
//! Each session is mapped to exactly one experimental arm so a user never
//! sees two different recommendation lists for the same publication within a
//! session. The mapping is a pure function of `(salt, session_id, arms)`:
//! nothing to store, nothing to coordinate, and any component can recompute
//! it offline.

use crate::hash::fnv1a64_parts;
use crate::model::{SessionId, SystemId, Task};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

/// Lower bound on the recommendation panel size.
pub const DEFAULT_K_MIN: usize = 3;
/// Upper bound on the recommendation panel size.
pub const DEFAULT_K_MAX: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssignError {
    #[error("experiment {0}: arms list is empty")]
    NoArms(String),
    #[error("experiment {0}: duplicate arm {1}")]
    DuplicateArm(String, SystemId),
    #[error("experiment {0}: need 1 <= k_min <= k_max, got {1}..={2}")]
    BadKBounds(String, usize, usize),
}

/// One experiment: the set of arms traffic is split across, the salt that
/// decorrelates it from other experiments, and the panel-size bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    pub task: Task,
    pub arms: Vec<SystemId>,
    pub salt: String,
    #[serde(default = "default_k_min")]
    pub k_min: usize,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
}

fn default_k_min() -> usize {
    DEFAULT_K_MIN
}

fn default_k_max() -> usize {
    DEFAULT_K_MAX
}

impl ExperimentConfig {
    pub fn new(
        experiment_id: impl Into<String>,
        task: Task,
        arms: Vec<SystemId>,
        salt: impl Into<String>,
    ) -> Result<Self, AssignError> {
        let cfg = Self {
            experiment_id: experiment_id.into(),
            task,
            arms,
            salt: salt.into(),
            k_min: DEFAULT_K_MIN,
            k_max: DEFAULT_K_MAX,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AssignError> {
        if self.arms.is_empty() {
            return Err(AssignError::NoArms(self.experiment_id.clone()));
        }
        let mut seen = HashSet::new();
        for arm in &self.arms {
            if !seen.insert(arm) {
                return Err(AssignError::DuplicateArm(
                    self.experiment_id.clone(),
                    arm.clone(),
                ));
            }
        }
        if self.k_min < 1 || self.k_min > self.k_max {
            return Err(AssignError::BadKBounds(
                self.experiment_id.clone(),
                self.k_min,
                self.k_max,
            ));
        }
        Ok(())
    }
}

/// Picks the arm for a session: `arms[h mod |arms|]` where `h` is the FNV-1a
/// hash of `salt ‖ 0x00 ‖ session_id`. Same inputs, same arm.
pub fn assign_session<'a>(session_id: &SessionId, cfg: &'a ExperimentConfig) -> &'a SystemId {
    let hash = fnv1a64_parts(&[cfg.salt.as_bytes(), &[0x00], session_id.as_str().as_bytes()]);
    let index = (hash % cfg.arms.len() as u64) as usize;
    &cfg.arms[index]
}

/// Clamps a requested panel size into the configured bounds and the number of
/// items actually available. Returns `None` (skip: show no panel) when fewer
/// than `k_min` items are available.
pub fn clamp_k(requested: usize, available: usize, cfg: &ExperimentConfig) -> Option<usize> {
    if available < cfg.k_min {
        return None;
    }
    Some(requested.max(cfg.k_min).min(cfg.k_max).min(available))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arms(n: usize) -> Vec<SystemId> {
        (0..n)
            .map(|i| SystemId::new(format!("arm{i}")).unwrap())
            .collect()
    }

    fn cfg(n_arms: usize) -> ExperimentConfig {
        ExperimentConfig::new("exp1", Task::Recommendation, arms(n_arms), "salt-a").unwrap()
    }

    #[test]
    fn assignment_is_deterministic() {
        let cfg = cfg(4);
        let sid = SessionId::new("s1").unwrap();
        assert_eq!(assign_session(&sid, &cfg), assign_session(&sid, &cfg));
    }

    #[test]
    fn single_arm_always_wins() {
        let cfg = cfg(1);
        for i in 0..100 {
            let sid = SessionId::new(format!("s{i}")).unwrap();
            assert_eq!(assign_session(&sid, &cfg).as_str(), "arm0");
        }
    }

    #[test]
    fn changing_salt_reshuffles() {
        let a = cfg(4);
        let mut b = a.clone();
        b.salt = "salt-b".to_string();
        let mut moved = 0;
        for i in 0..1000 {
            let sid = SessionId::new(format!("s{i}")).unwrap();
            if assign_session(&sid, &a) != assign_session(&sid, &b) {
                moved += 1;
            }
        }
        // With 4 arms, ~75% of sessions should land elsewhere under a new salt.
        assert!(moved > 600, "only {moved} of 1000 sessions moved");
    }

    #[test]
    fn balance_over_four_arms() {
        let cfg = cfg(4);
        let mut counts = [0usize; 4];
        for i in 0..10_000 {
            let sid = SessionId::new(format!("s{i}")).unwrap();
            let arm = assign_session(&sid, &cfg);
            let idx: usize = arm.as_str()[3..].parse().unwrap();
            counts[idx] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            assert!(
                (2350..=2650).contains(&c),
                "arm{i} got {c} of 10000 sessions"
            );
        }
    }

    #[test]
    fn uniform_after_arm_removal() {
        let mut cfg = cfg(4);
        cfg.arms.remove(2);
        cfg.validate().unwrap();
        let mut counts = std::collections::HashMap::new();
        for i in 0..9_000 {
            let sid = SessionId::new(format!("s{i}")).unwrap();
            *counts.entry(assign_session(&sid, &cfg).clone()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 3);
        for (arm, c) in counts {
            assert!((2800..=3200).contains(&c), "{arm} got {c} of 9000");
        }
    }

    #[test]
    fn clamp_k_bounds() {
        let cfg = cfg(2);
        assert_eq!(clamp_k(15, 50, &cfg), Some(10));
        assert_eq!(clamp_k(1, 50, &cfg), Some(3));
        assert_eq!(clamp_k(5, 2, &cfg), None);
        assert_eq!(clamp_k(5, 5, &cfg), Some(5));
        assert_eq!(clamp_k(0, 4, &cfg), Some(3));
        assert_eq!(clamp_k(7, 3, &cfg), Some(3));
    }

    #[test]
    fn config_validation() {
        assert!(matches!(
            ExperimentConfig::new("e", Task::Adhoc, vec![], "s"),
            Err(AssignError::NoArms(_))
        ));
        let dup = vec![
            SystemId::new("a").unwrap(),
            SystemId::new("a").unwrap(),
        ];
        assert!(matches!(
            ExperimentConfig::new("e", Task::Adhoc, dup, "s"),
            Err(AssignError::DuplicateArm(..))
        ));
        let mut bad = cfg(2);
        bad.k_min = 11;
        assert!(matches!(bad.validate(), Err(AssignError::BadKBounds(..))));
    }
}
