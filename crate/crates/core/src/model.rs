//! Comment-tree data model and the on-disk corpus cache.
//!
//! A [`ThreadTree`] owns one post and every comment beneath it. Trees are
//! always built through [`ThreadTree::build`], which computes depths and
//! normalizes sibling order, so every tree in memory satisfies the same
//! invariants whether it came from a provider listing, the synthetic
//! generator, or a cache file.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version written to (and required from) every corpus cache file.
pub const SCHEMA_VERSION: u32 = 1;

/// Seconds since the Unix epoch, UTC.
pub type EpochSeconds = i64;

/// Bodies that mark a deleted or removed comment.
pub const TOMBSTONE_MARKERS: [&str; 2] = ["[deleted]", "[removed]"];

/// Whether a body is a deletion marker or blank.
pub fn is_tombstone_body(body: &str) -> bool {
    let trimmed = body.trim();
    trimmed.is_empty() || TOMBSTONE_MARKERS.contains(&trimmed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    pub parent_id: Option<String>,
    pub post_id: String,
    pub author: String,
    pub body: String,
    pub created_at: EpochSeconds,
    pub score: i64,
    pub toxicity: Option<f64>,
    pub depth: u32,
    /// Parent was missing from the listing; promoted to a top-level comment.
    #[serde(default)]
    pub orphaned: bool,
    /// Body was deleted or removed. Counted as activity, never scored.
    #[serde(default)]
    pub tombstone: bool,
}

impl Comment {
    fn order_key(&self) -> (EpochSeconds, &str) {
        (self.created_at, self.id.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub title: String,
    pub author: String,
    pub created_at: EpochSeconds,
    pub score: i64,
    pub tlc_ids: Vec<String>,
}

/// A post plus its whole comment hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadTree {
    pub post: Post,
    pub comments: BTreeMap<String, Comment>,
    /// Every comment id maps to its replies, oldest first.
    pub children: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub subreddit: String,
    pub fetched_at: EpochSeconds,
    pub threads: Vec<ThreadTree>,
}

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("duplicate comment id {0}")]
    DuplicateId(String),
    #[error("comment {id} has unresolved parent {parent}")]
    Orphan { id: String, parent: String },
    #[error("comment {0} is part of a reply cycle")]
    Cycle(String),
    #[error("comment {id} belongs to post {found}, expected {expected}")]
    WrongPost {
        id: String,
        found: String,
        expected: String,
    },
    #[error("toxicity {value} of comment {id} is outside [0, 1]")]
    ToxicityRange { id: String, value: f64 },
    #[error("thread {post}: {detail}")]
    Inconsistent { post: String, detail: String },
}

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("unsupported schema_version {found:?}, expected {SCHEMA_VERSION}")]
    SchemaMismatch { found: Option<u64> },
    #[error("corrupt cache: {0}")]
    Corrupt(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Header fields of a post before its comment list is known.
#[derive(Debug, Clone, PartialEq)]
pub struct PostHeader {
    pub id: String,
    pub title: String,
    pub author: String,
    pub created_at: EpochSeconds,
    pub score: i64,
}

impl ThreadTree {
    /// Assemble a normalized tree from a post and its comments in any order.
    ///
    /// `parent_id` on the input comments must already be resolved: `None`
    /// for top-level comments, otherwise the id of another comment in
    /// `comments`. Depths, `post_id`, children lists and `tlc_ids` are
    /// recomputed here.
    pub fn build(post: PostHeader, comments: Vec<Comment>) -> Result<Self, TreeError> {
        let mut by_id = BTreeMap::new();
        for mut c in comments {
            c.post_id = post.id.clone();
            if let Some(t) = c.toxicity {
                if !(0.0..=1.0).contains(&t) {
                    return Err(TreeError::ToxicityRange { id: c.id, value: t });
                }
            }
            if by_id.contains_key(&c.id) {
                return Err(TreeError::DuplicateId(c.id));
            }
            by_id.insert(c.id.clone(), c);
        }
        for c in by_id.values() {
            if let Some(parent) = &c.parent_id {
                if !by_id.contains_key(parent) {
                    return Err(TreeError::Orphan {
                        id: c.id.clone(),
                        parent: parent.clone(),
                    });
                }
            }
        }

        let depths = compute_depths(&by_id)?;
        for (id, depth) in depths {
            by_id.get_mut(&id).expect("depth for known id").depth = depth;
        }

        let mut children: BTreeMap<String, Vec<String>> =
            by_id.keys().map(|id| (id.clone(), Vec::new())).collect();
        let mut tlcs = Vec::new();
        let mut ordered: Vec<&Comment> = by_id.values().collect();
        ordered.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
        for c in ordered {
            match &c.parent_id {
                Some(p) => children.get_mut(p).expect("resolved parent").push(c.id.clone()),
                None => tlcs.push(c.id.clone()),
            }
        }

        Ok(ThreadTree {
            post: Post {
                id: post.id,
                title: post.title,
                author: post.author,
                created_at: post.created_at,
                score: post.score,
                tlc_ids: tlcs,
            },
            comments: by_id,
            children,
        })
    }

    pub fn header(&self) -> PostHeader {
        PostHeader {
            id: self.post.id.clone(),
            title: self.post.title.clone(),
            author: self.post.author.clone(),
            created_at: self.post.created_at,
            score: self.post.score,
        }
    }

    /// Check every structural invariant. Used when loading untrusted caches.
    pub fn validate(&self) -> Result<(), TreeError> {
        let inconsistent = |detail: String| TreeError::Inconsistent {
            post: self.post.id.clone(),
            detail,
        };
        if let Some((key, c)) = self.comments.iter().find(|(k, c)| **k != c.id) {
            return Err(inconsistent(format!("key {key} holds comment {}", c.id)));
        }
        let rebuilt = ThreadTree::build(self.header(), self.comments.values().cloned().collect())?;
        for (id, c) in &self.comments {
            if c.post_id != self.post.id {
                return Err(TreeError::WrongPost {
                    id: c.id.clone(),
                    found: c.post_id.clone(),
                    expected: self.post.id.clone(),
                });
            }
            if c.depth != rebuilt.comments[id].depth {
                return Err(inconsistent(format!("comment {id} has wrong depth {}", c.depth)));
            }
        }
        if rebuilt.post.tlc_ids != self.post.tlc_ids {
            return Err(inconsistent("tlc_ids are not the normalized top-level list".into()));
        }
        if rebuilt.children != self.children {
            return Err(inconsistent("children lists are not normalized".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.comments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comments.is_empty()
    }

    pub fn replies(&self, id: &str) -> &[String] {
        self.children.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Comment ids in display order: each top-level comment followed by its
    /// replies, depth first.
    pub fn preorder(&self) -> Vec<&str> {
        let mut out = Vec::with_capacity(self.comments.len());
        for tlc in &self.post.tlc_ids {
            self.push_subtree(tlc, &mut out);
        }
        out
    }

    /// `root` and every comment beneath it, in display order.
    pub fn subtree(&self, root: &str) -> Vec<&str> {
        let mut out = Vec::new();
        if let Some((key, _)) = self.comments.get_key_value(root) {
            self.push_subtree(key, &mut out);
        }
        out
    }

    fn push_subtree<'a>(&'a self, root: &'a str, out: &mut Vec<&'a str>) {
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            out.push(id);
            stack.extend(self.replies(id).iter().rev().map(String::as_str));
        }
    }

    /// Ancestors of `id`, top-level comment first, excluding `id` itself.
    pub fn ancestors(&self, id: &str) -> Vec<String> {
        let mut chain = Vec::new();
        let mut cur = self.comments.get(id).and_then(|c| c.parent_id.as_deref());
        while let Some(p) = cur {
            chain.push(p.to_string());
            cur = self.comments.get(p).and_then(|c| c.parent_id.as_deref());
        }
        chain.reverse();
        chain
    }
}

fn compute_depths(by_id: &BTreeMap<String, Comment>) -> Result<BTreeMap<String, u32>, TreeError> {
    let mut depth: BTreeMap<String, u32> = BTreeMap::new();
    for start in by_id.keys() {
        if depth.contains_key(start) {
            continue;
        }
        let mut chain: Vec<&str> = Vec::new();
        let mut on_chain: BTreeSet<&str> = BTreeSet::new();
        let mut cur = start.as_str();
        let base = loop {
            if let Some(&d) = depth.get(cur) {
                break d as i64;
            }
            if !on_chain.insert(cur) {
                return Err(TreeError::Cycle(cur.to_string()));
            }
            chain.push(cur);
            match &by_id[cur].parent_id {
                Some(p) => cur = p.as_str(),
                None => break -1,
            }
        };
        for (i, id) in chain.iter().rev().enumerate() {
            depth.insert((*id).to_string(), (base + 1 + i as i64) as u32);
        }
    }
    Ok(depth)
}

impl Corpus {
    pub fn comment_count(&self) -> usize {
        self.threads.iter().map(ThreadTree::len).sum()
    }

    pub fn thread(&self, post_id: &str) -> Option<&ThreadTree> {
        self.threads.iter().find(|t| t.post.id == post_id)
    }

    pub fn comments(&self) -> impl Iterator<Item = &Comment> {
        self.threads.iter().flat_map(|t| t.comments.values())
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        let mut posts = BTreeSet::new();
        let mut comments = BTreeSet::new();
        for t in &self.threads {
            if !posts.insert(t.post.id.as_str()) {
                return Err(TreeError::Inconsistent {
                    post: t.post.id.clone(),
                    detail: "duplicate post id".into(),
                });
            }
            t.validate()?;
            for id in t.comments.keys() {
                if !comments.insert(id.as_str()) {
                    return Err(TreeError::DuplicateId(id.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            schema_version: u32,
            #[serde(flatten)]
            corpus: &'a Corpus,
        }
        let doc = Doc {
            schema_version: SCHEMA_VERSION,
            corpus: self,
        };
        serde_json::to_string_pretty(&doc).expect("corpus serializes")
    }

    /// Parse and validate a cache document.
    pub fn from_json(text: &str) -> Result<Self, CacheError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CacheError::Corrupt(e.to_string()))?;
        let found = value.get("schema_version").and_then(serde_json::Value::as_u64);
        if found != Some(u64::from(SCHEMA_VERSION)) {
            return Err(CacheError::SchemaMismatch { found });
        }
        let corpus: Corpus =
            serde_json::from_value(value).map_err(|e| CacheError::Corrupt(e.to_string()))?;
        corpus
            .validate()
            .map_err(|e| CacheError::Corrupt(e.to_string()))?;
        Ok(corpus)
    }

    pub fn load(path: &Path) -> Result<Self, CacheError> {
        let text = fs::read_to_string(path).map_err(|source| CacheError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), CacheError> {
        write_atomic(path, self.to_json().as_bytes())
    }
}

/// Write `bytes` to a temporary file next to `path`, then rename over it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CacheError> {
    let io = |source| CacheError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
