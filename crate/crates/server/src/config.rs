//! TOML configuration for the aggregation server.

use serde::Deserialize;
use std::path::{Path, PathBuf};

fn default_listen() -> String {
    "127.0.0.1:9090".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    /// Registry snapshot and segment journal live here; state is
    /// memory-only when absent.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    /// Candidate lists used to validate run uploads.
    #[serde(default)]
    pub candidates: Option<PathBuf>,
    #[serde(default)]
    pub dwell_threshold_ms: Option<i64>,
    #[serde(default)]
    pub participants: Vec<Participant>,
}

/// One accredited participant and the bearer token that identifies it.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Participant {
    pub name: String,
    pub token: String,
}

impl ServerConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| anyhow::anyhow!("parse {}: {e}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parses() {
        let cfg: ServerConfig = toml::from_str(
            r#"
            listen = "0.0.0.0:9999"
            candidates = "cand.tsv"

            [[participants]]
            name = "team-a"
            token = "secret-a"

            [[participants]]
            name = "site-1"
            token = "secret-s1"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.listen, "0.0.0.0:9999");
        assert_eq!(cfg.participants.len(), 2);
        assert!(cfg.data_dir.is_none());
    }
}
