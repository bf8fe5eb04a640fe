use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ToxicityScore;
use crate::model::{write_atomic, CacheError, SCHEMA_VERSION};

/// Scores by comment id, persisted next to the corpus it was built from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreCache {
    entries: BTreeMap<String, ToxicityScore>,
}

#[derive(Serialize, Deserialize)]
struct Doc {
    schema_version: u32,
    entries: BTreeMap<String, ToxicityScore>,
}

impl ScoreCache {
    /// `<corpus>.scores.json`
    pub fn path_for(corpus: &Path) -> PathBuf {
        let mut name = corpus.as_os_str().to_owned();
        name.push(".scores.json");
        PathBuf::from(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&ToxicityScore> {
        self.entries.get(id)
    }

    pub fn insert(&mut self, id: String, score: ToxicityScore) {
        self.entries.insert(id, score);
    }

    /// A missing file is an empty cache.
    pub fn load(path: &Path) -> Result<Self, CacheError> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Self::default()),
            Err(source) => {
                return Err(CacheError::Io {
                    path: path.display().to_string(),
                    source,
                })
            }
        };
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CacheError::Corrupt(e.to_string()))?;
        let found = value.get("schema_version").and_then(serde_json::Value::as_u64);
        if found != Some(u64::from(SCHEMA_VERSION)) {
            return Err(CacheError::SchemaMismatch { found });
        }
        let doc: Doc = serde_json::from_value(value).map_err(|e| CacheError::Corrupt(e.to_string()))?;
        Ok(Self { entries: doc.entries })
    }

    pub fn save(&self, path: &Path) -> Result<(), CacheError> {
        let doc = Doc {
            schema_version: SCHEMA_VERSION,
            entries: self.entries.clone(),
        };
        write_atomic(path, serde_json::to_string_pretty(&doc).expect("cache serializes").as_bytes())
    }
}
