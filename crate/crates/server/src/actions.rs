//! Append-only moderation log stored as JSON Lines.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use threadscope_core::model::EpochSeconds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Approve,
    Remove,
    Report,
}

impl ActionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Approve => "approve",
            ActionKind::Remove => "remove",
            ActionKind::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModerationAction {
    pub action_id: String,
    pub comment_id: String,
    pub kind: ActionKind,
    pub actor: String,
    pub acted_at: EpochSeconds,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("action log {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("action log {path} line {line} is not a valid action: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
}

/// Latest action per comment, folding by `(acted_at, action_id)`.
pub fn effective_states(actions: &[ModerationAction]) -> BTreeMap<String, ActionKind> {
    let mut ordered: Vec<&ModerationAction> = actions.iter().collect();
    ordered.sort_by(|a, b| (a.acted_at, &a.action_id).cmp(&(b.acted_at, &b.action_id)));
    ordered.into_iter().map(|a| (a.comment_id.clone(), a.kind)).collect()
}

struct Inner {
    file: File,
    actions: Vec<ModerationAction>,
    next_seq: u64,
}

/// The log file plus an in-memory copy of every entry. Appends are
/// serialized through one mutex and synced before they are acknowledged.
pub struct ActionLog {
    path: PathBuf,
    inner: Mutex<Inner>,
}

impl std::fmt::Debug for ActionLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ActionLog").field("path", &self.path).finish_non_exhaustive()
    }
}

fn sequence_of(action_id: &str) -> Option<u64> {
    action_id.strip_prefix('a')?.parse().ok()
}

impl ActionLog {
    /// Opens or creates the log and replays it. A final line without a
    /// trailing newline that fails to parse is a torn write from a crash; it
    /// is cut off. Any other bad line is an error.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, LogError> {
        let path = path.into();
        let io_err = |source| LogError::Io {
            path: path.clone(),
            source,
        };
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(io_err)?;

        let mut actions = Vec::new();
        let mut good_len = 0u64;
        // (truncate torn bytes, terminate a valid but unterminated last line)
        let mut repair = (false, false);
        {
            let mut reader = BufReader::new(&file);
            let mut line = String::new();
            let mut lineno = 0;
            loop {
                line.clear();
                let n = reader.read_line(&mut line).map_err(io_err)?;
                if n == 0 {
                    break;
                }
                lineno += 1;
                let complete = line.ends_with('\n');
                let text = line.trim();
                if !text.is_empty() {
                    match serde_json::from_str::<ModerationAction>(text) {
                        Ok(a) => {
                            actions.push(a);
                            repair.1 = !complete;
                        }
                        Err(_) if !complete => {
                            tracing::warn!(path = %path.display(), line = lineno, "dropping torn final log line");
                            repair.0 = true;
                            break;
                        }
                        Err(e) => {
                            return Err(LogError::Corrupt {
                                path: path.clone(),
                                line: lineno,
                                message: e.to_string(),
                            })
                        }
                    }
                }
                good_len += n as u64;
            }
        }
        if repair.0 {
            file.set_len(good_len).map_err(io_err)?;
            file.seek(SeekFrom::End(0)).map_err(io_err)?;
        }
        if repair.1 {
            file.write_all(b"\n").map_err(io_err)?;
        }
        if repair.0 || repair.1 {
            file.sync_data().map_err(io_err)?;
        }
        let next_seq = actions.iter().filter_map(|a| sequence_of(&a.action_id)).max().map_or(1, |m| m + 1);
        Ok(Self {
            path,
            inner: Mutex::new(Inner {
                file,
                actions,
                next_seq,
            }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Assigns the next action id, writes the entry and syncs it to disk.
    pub fn append(
        &self,
        comment_id: &str,
        kind: ActionKind,
        actor: &str,
        acted_at: EpochSeconds,
    ) -> Result<ModerationAction, LogError> {
        let mut inner = self.inner.lock().unwrap_or_else(|p| p.into_inner());
        let action = ModerationAction {
            action_id: format!("a{:012}", inner.next_seq),
            comment_id: comment_id.to_string(),
            kind,
            actor: actor.to_string(),
            acted_at,
        };
        let mut line = serde_json::to_vec(&action).expect("action serializes");
        line.push(b'\n');
        let io_err = |source| LogError::Io {
            path: self.path.clone(),
            source,
        };
        inner.file.write_all(&line).map_err(io_err)?;
        inner.file.sync_data().map_err(io_err)?;
        inner.next_seq += 1;
        inner.actions.push(action.clone());
        Ok(action)
    }

    pub fn actions(&self) -> Vec<ModerationAction> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner()).actions.clone()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap_or_else(|p| p.into_inner()).actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn effective(&self) -> BTreeMap<String, ActionKind> {
        effective_states(&self.inner.lock().unwrap_or_else(|p| p.into_inner()).actions)
    }
}
