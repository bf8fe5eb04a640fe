//! Listing documents to [`ThreadTree`]s.
//!
//! Two document shapes are accepted:
//!
//! * the flat shape used by fixtures and the cache tooling,
//!   `{"post": {...}, "comments": [{...}, ...]}` where each comment names
//!   its parent by id (absent, `null`, or the post id for top-level
//!   comments);
//! * the provider's native comment page, a two-element array of listings
//!   (post, then nested comments with `replies` sub-listings and `more`
//!   stubs).

use std::collections::BTreeSet;

use serde_json::Value;
use thiserror::Error;

use crate::model::{is_tombstone_body, Comment, EpochSeconds, PostHeader, ThreadTree, TreeError};

#[derive(Debug, Error, PartialEq)]
pub enum ListingError {
    #[error("malformed listing: {record} is missing or has invalid `{field}`")]
    Malformed { record: String, field: &'static str },
    #[error("comment {id} replies to unknown parent {parent}")]
    Orphan { id: String, parent: String },
    #[error("duplicate comment id {0}")]
    DuplicateId(String),
    #[error("comment {0} is part of a reply cycle")]
    Cycle(String),
    #[error("invalid tree: {0}")]
    Tree(String),
}

impl From<TreeError> for ListingError {
    fn from(e: TreeError) -> Self {
        match e {
            TreeError::DuplicateId(id) => ListingError::DuplicateId(id),
            TreeError::Orphan { id, parent } => ListingError::Orphan { id, parent },
            TreeError::Cycle(id) => ListingError::Cycle(id),
            other => ListingError::Tree(other.to_string()),
        }
    }
}

/// What to do with a comment whose parent is not in the listing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum OrphanPolicy {
    /// Re-root it as a top-level comment and set `orphaned`.
    #[default]
    Promote,
    Reject,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawComment {
    pub id: String,
    /// Parent as written in the source, provider prefixes included.
    pub parent: Option<String>,
    pub author: String,
    pub body: String,
    pub created_at: EpochSeconds,
    pub score: i64,
    pub toxicity: Option<f64>,
}

/// Flattened records of one listing, before tree assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct RawListing {
    pub post: PostHeader,
    pub comments: Vec<RawComment>,
    /// Comment ids referenced by `more` stubs and not yet fetched.
    pub more: Vec<String>,
    /// Comments whose replies were cut off by the provider's depth limit.
    pub continue_from: Vec<String>,
}

/// Parse a listing document into a normalized tree, promoting orphans.
pub fn parse_listing(raw: &Value) -> Result<ThreadTree, ListingError> {
    parse_listing_with(raw, OrphanPolicy::Promote)
}

pub fn parse_listing_with(raw: &Value, policy: OrphanPolicy) -> Result<ThreadTree, ListingError> {
    build_tree(RawListing::from_value(raw)?, policy)
}

impl RawListing {
    pub fn from_value(raw: &Value) -> Result<Self, ListingError> {
        match raw {
            Value::Array(pages) => Self::from_provider_pages(pages),
            Value::Object(obj) if obj.contains_key("post") => Self::from_flat(raw),
            _ => Err(ListingError::Malformed {
                record: "document".into(),
                field: "post",
            }),
        }
    }

    fn from_flat(raw: &Value) -> Result<Self, ListingError> {
        let post = post_header(&raw["post"], "post")?;
        let comments = match raw.get("comments") {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .map(|(i, c)| raw_comment(c, &format!("comments[{i}]")))
                .collect::<Result<_, _>>()?,
            Some(_) => {
                return Err(ListingError::Malformed {
                    record: "document".into(),
                    field: "comments",
                })
            }
        };
        Ok(Self {
            post,
            comments,
            more: Vec::new(),
            continue_from: Vec::new(),
        })
    }

    fn from_provider_pages(pages: &[Value]) -> Result<Self, ListingError> {
        let malformed = |field| ListingError::Malformed {
            record: "document".into(),
            field,
        };
        let post_thing = pages
            .first()
            .and_then(|p| p.pointer("/data/children/0"))
            .ok_or_else(|| malformed("post listing"))?;
        let post = post_header(&post_thing["data"], "post")?;
        let mut out = Self {
            post,
            comments: Vec::new(),
            more: Vec::new(),
            continue_from: Vec::new(),
        };
        if let Some(children) = pages.get(1).and_then(|p| p.pointer("/data/children")) {
            out.absorb_things(children)?;
        }
        Ok(out)
    }

    /// Flatten a list of provider "things" (comments, `more` stubs and their
    /// nested replies) into this listing.
    pub fn absorb_things(&mut self, things: &Value) -> Result<(), ListingError> {
        let items = things.as_array().ok_or(ListingError::Malformed {
            record: "listing".into(),
            field: "children",
        })?;
        let mut stack: Vec<&Value> = items.iter().rev().collect();
        while let Some(thing) = stack.pop() {
            let data = &thing["data"];
            match thing["kind"].as_str() {
                Some("t1") => {
                    let label = format!("comment {}", data["id"].as_str().unwrap_or("?"));
                    self.comments.push(raw_comment(data, &label)?);
                    if let Some(children) = data.pointer("/replies/data/children").and_then(Value::as_array) {
                        stack.extend(children.iter().rev());
                    }
                }
                Some("more") => {
                    let ids: Vec<String> = data["children"]
                        .as_array()
                        .map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect())
                        .unwrap_or_default();
                    if ids.is_empty() {
                        if let Some(parent) = data["parent_id"].as_str() {
                            self.continue_from.push(strip_kind(parent).to_string());
                        }
                    }
                    self.more.extend(ids);
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Resolve parents, apply the orphan policy, and assemble the tree.
pub fn build_tree(listing: RawListing, policy: OrphanPolicy) -> Result<ThreadTree, ListingError> {
    let post_id = listing.post.id.clone();
    let ids: BTreeSet<&str> = listing.comments.iter().map(|c| c.id.as_str()).collect();
    let mut comments = Vec::with_capacity(listing.comments.len());
    for raw in &listing.comments {
        let parent = raw.parent.as_deref().and_then(|p| resolve_parent(p, &post_id));
        let (parent_id, orphaned) = match parent {
            Some(Parent::Comment(p)) if ids.contains(p) => (Some(p.to_string()), false),
            None => (None, false),
            Some(Parent::Comment(p) | Parent::ForeignPost(p)) => match policy {
                OrphanPolicy::Promote => (None, true),
                OrphanPolicy::Reject => {
                    return Err(ListingError::Orphan {
                        id: raw.id.clone(),
                        parent: p.to_string(),
                    })
                }
            },
        };
        if let Some(t) = raw.toxicity {
            if !(0.0..=1.0).contains(&t) {
                return Err(ListingError::Malformed {
                    record: format!("comment {}", raw.id),
                    field: "toxicity",
                });
            }
        }
        let tombstone = is_tombstone_body(&raw.body);
        comments.push(Comment {
            id: raw.id.clone(),
            parent_id,
            post_id: post_id.clone(),
            author: raw.author.clone(),
            body: raw.body.clone(),
            created_at: raw.created_at,
            score: raw.score,
            toxicity: if tombstone { None } else { raw.toxicity },
            depth: 0,
            orphaned,
            tombstone,
        });
    }
    Ok(ThreadTree::build(listing.post, comments)?)
}

enum Parent<'a> {
    Comment(&'a str),
    ForeignPost(&'a str),
}

fn resolve_parent<'a>(raw: &'a str, post_id: &str) -> Option<Parent<'a>> {
    if raw.is_empty() {
        return None;
    }
    if let Some(post) = raw.strip_prefix("t3_") {
        return if post == post_id {
            None
        } else {
            Some(Parent::ForeignPost(raw))
        };
    }
    let id = strip_kind(raw);
    if id == post_id {
        None
    } else {
        Some(Parent::Comment(id))
    }
}

fn strip_kind(fullname: &str) -> &str {
    fullname.strip_prefix("t1_").unwrap_or(fullname)
}

fn post_header(v: &Value, record: &str) -> Result<PostHeader, ListingError> {
    if !v.is_object() {
        return Err(ListingError::Malformed {
            record: record.into(),
            field: "post",
        });
    }
    Ok(PostHeader {
        id: string_field(v, "id", record)?,
        title: string_field(v, "title", record)?,
        author: string_field(v, "author", record)?,
        created_at: time_field(v, record)?,
        score: int_field(v, "score", record)?,
    })
}

fn raw_comment(v: &Value, record: &str) -> Result<RawComment, ListingError> {
    if !v.is_object() {
        return Err(ListingError::Malformed {
            record: record.into(),
            field: "comment",
        });
    }
    let parent = match v.get("parent_id") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            return Err(ListingError::Malformed {
                record: record.into(),
                field: "parent_id",
            })
        }
    };
    let toxicity = match v.get("toxicity") {
        None | Some(Value::Null) => None,
        Some(t) => Some(t.as_f64().ok_or(ListingError::Malformed {
            record: record.into(),
            field: "toxicity",
        })?),
    };
    Ok(RawComment {
        id: string_field(v, "id", record)?,
        parent,
        author: string_field(v, "author", record)?,
        body: string_field(v, "body", record)?,
        created_at: time_field(v, record)?,
        score: int_field(v, "score", record)?,
        toxicity,
    })
}

fn string_field(v: &Value, field: &'static str, record: &str) -> Result<String, ListingError> {
    v.get(field)
        .and_then(Value::as_str)
        .map(String::from)
        .ok_or_else(|| ListingError::Malformed {
            record: record.into(),
            field,
        })
}

fn int_field(v: &Value, field: &'static str, record: &str) -> Result<i64, ListingError> {
    let n = v.get(field).ok_or_else(|| ListingError::Malformed {
        record: record.into(),
        field,
    })?;
    n.as_i64()
        .or_else(|| n.as_f64().filter(|f| f.is_finite()).map(|f| f as i64))
        .ok_or_else(|| ListingError::Malformed {
            record: record.into(),
            field,
        })
}

/// `created_utc` (provider, possibly fractional) or `created_at`.
fn time_field(v: &Value, record: &str) -> Result<EpochSeconds, ListingError> {
    let n = v
        .get("created_utc")
        .or_else(|| v.get("created_at"))
        .ok_or_else(|| ListingError::Malformed {
            record: record.into(),
            field: "created_utc",
        })?;
    n.as_i64()
        .or_else(|| n.as_f64().filter(|f| f.is_finite()).map(|f| f.floor() as i64))
        .ok_or_else(|| ListingError::Malformed {
            record: record.into(),
            field: "created_utc",
        })
}
