use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_ADDR: &str = "THREADSCOPE_ADDR";
pub const ENV_CORPUS: &str = "THREADSCOPE_CORPUS";
pub const ENV_ACTION_LOG: &str = "THREADSCOPE_ACTION_LOG";
pub const ENV_STATIC_DIR: &str = "THREADSCOPE_STATIC_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("{var}={value:?} is not a valid listen address")]
    BadAddr { var: &'static str, value: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub addr: SocketAddr,
    pub corpus: PathBuf,
    pub action_log: PathBuf,
    /// Directory of prebuilt UI assets, served for any path the API does not claim.
    pub static_dir: Option<PathBuf>,
    /// Per-endpoint request counters. Off unless asked for.
    pub telemetry: bool,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            addr: SocketAddr::from(([127, 0, 0, 1], 8080)),
            corpus: PathBuf::from("corpus.json"),
            action_log: PathBuf::from("actions.jsonl"),
            static_dir: None,
            telemetry: false,
        }
    }
}

impl ServerConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Applies `THREADSCOPE_*` overrides read through `lookup`.
    pub fn with_env(mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        if let Some(v) = lookup(ENV_ADDR) {
            self.addr = v.parse().map_err(|_| ConfigError::BadAddr { var: ENV_ADDR, value: v })?;
        }
        if let Some(v) = lookup(ENV_CORPUS) {
            self.corpus = v.into();
        }
        if let Some(v) = lookup(ENV_ACTION_LOG) {
            self.action_log = v.into();
        }
        if let Some(v) = lookup(ENV_STATIC_DIR) {
            self.static_dir = Some(v.into());
        }
        Ok(self)
    }

    /// File (if any), then process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let base = match path {
            Some(p) => Self::from_toml_file(p)?,
            None => Self::default(),
        };
        base.with_env(|k| std::env::var(k).ok())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn file_then_env() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("server.toml");
        std::fs::write(&path, "addr = \"0.0.0.0:9000\"\ncorpus = \"a.json\"\n").unwrap();
        let cfg = ServerConfig::from_toml_file(&path).unwrap();
        assert_eq!(cfg.addr.port(), 9000);
        assert_eq!(cfg.action_log, PathBuf::from("actions.jsonl"));

        let env: HashMap<&str, &str> = [(ENV_CORPUS, "b.json"), (ENV_ACTION_LOG, "l.jsonl")].into();
        let cfg = cfg.with_env(|k| env.get(k).map(|v| v.to_string())).unwrap();
        assert_eq!(cfg.corpus, PathBuf::from("b.json"));
        assert_eq!(cfg.action_log, PathBuf::from("l.jsonl"));
        assert_eq!(cfg.addr.port(), 9000);
        assert!(!cfg.telemetry);
    }

    #[test]
    fn rejects_bad_input() {
        let err = ServerConfig::default().with_env(|k| (k == ENV_ADDR).then(|| "nope".to_string()));
        assert!(matches!(err, Err(ConfigError::BadAddr { .. })));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("server.toml");
        std::fs::write(&path, "port = 3\n").unwrap();
        assert!(matches!(ServerConfig::from_toml_file(&path), Err(ConfigError::Parse { .. })));
    }
}
