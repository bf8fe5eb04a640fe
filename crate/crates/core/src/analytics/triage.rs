//! Post ordering, comment filtering and activity detection.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{classify, AnalyticsError, ClassSet, MetricThresholds, TimeWindow};
use crate::model::{Corpus, ThreadTree};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortKey {
    #[default]
    Recency,
    Toxicity,
    Score,
    Activity,
}

impl SortKey {
    pub const ALL: [SortKey; 4] = [SortKey::Recency, SortKey::Toxicity, SortKey::Score, SortKey::Activity];

    pub fn as_str(self) -> &'static str {
        match self {
            SortKey::Recency => "recency",
            SortKey::Toxicity => "toxicity",
            SortKey::Score => "score",
            SortKey::Activity => "activity",
        }
    }
}

impl fmt::Display for SortKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SortKey {
    type Err = AnalyticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SortKey::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| AnalyticsError::UnknownSortKey(s.to_string()))
    }
}

/// Descending sort value for one post: compared field by field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostKey {
    pub primary: i64,
    pub secondary: i64,
    pub tiebreak: f64,
}

impl PostKey {
    fn cmp_desc(&self, other: &Self) -> Ordering {
        other
            .primary
            .cmp(&self.primary)
            .then(other.secondary.cmp(&self.secondary))
            .then(other.tiebreak.total_cmp(&self.tiebreak))
    }
}

/// The value a post is ranked by under `key`.
///
/// * recency: newest in-window comment; posts without one follow, newest post first
/// * toxicity: in-window comments at or above the toxicity cutoff, then the highest in-window toxicity
/// * score: highest in-window comment score
/// * activity: in-window comment count
pub fn post_key(
    thread: &ThreadTree,
    key: SortKey,
    thresholds: &MetricThresholds,
    window: &TimeWindow,
) -> Result<PostKey, AnalyticsError> {
    let in_window = || thread.comments.values().filter(|c| window.contains(c.created_at));
    let key = match key {
        SortKey::Recency => match in_window().map(|c| c.created_at).max() {
            Some(latest) => PostKey {
                primary: 1,
                secondary: latest,
                tiebreak: 0.0,
            },
            None => PostKey {
                primary: 0,
                secondary: thread.post.created_at,
                tiebreak: 0.0,
            },
        },
        SortKey::Toxicity => {
            let mut count = 0;
            let mut max = f64::NEG_INFINITY;
            for c in in_window().filter(|c| !c.tombstone) {
                let tox = c.toxicity.ok_or_else(|| AnalyticsError::UnscoredComment(c.id.clone()))?;
                count += i64::from(tox >= thresholds.toxicity_threshold);
                max = max.max(tox);
            }
            PostKey {
                primary: count,
                secondary: 0,
                tiebreak: max,
            }
        }
        SortKey::Score => match in_window().filter(|c| !c.tombstone).map(|c| c.score).max() {
            Some(best) => PostKey {
                primary: 1,
                secondary: best,
                tiebreak: 0.0,
            },
            None => PostKey {
                primary: 0,
                secondary: 0,
                tiebreak: 0.0,
            },
        },
        SortKey::Activity => PostKey {
            primary: in_window().count() as i64,
            secondary: 0,
            tiebreak: 0.0,
        },
    };
    Ok(key)
}

/// Every post id, best first under `key`; equal keys fall back to id order.
pub fn sort_posts(
    corpus: &Corpus,
    key: SortKey,
    thresholds: &MetricThresholds,
    window: &TimeWindow,
) -> Result<Vec<String>, AnalyticsError> {
    let mut keyed = corpus
        .threads
        .iter()
        .map(|t| Ok((post_key(t, key, thresholds, window)?, t.post.id.as_str())))
        .collect::<Result<Vec<_>, AnalyticsError>>()?;
    keyed.sort_by(|a, b| a.0.cmp_desc(&b.0).then_with(|| a.1.cmp(b.1)));
    Ok(keyed.into_iter().map(|(_, id)| id.to_string()).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterMatch {
    pub id: String,
    /// Top-level comment first, direct parent last.
    pub ancestors: Vec<String>,
}

/// Comments whose class is in `classes`, in display order, each with the
/// chain of comments needed to show it in context.
pub fn filter_comments(
    thread: &ThreadTree,
    classes: ClassSet,
    thresholds: &MetricThresholds,
) -> Result<Vec<FilterMatch>, AnalyticsError> {
    let mut out = Vec::new();
    for id in thread.preorder() {
        if classes.contains(classify(&thread.comments[id], thresholds)?) {
            out.push(FilterMatch {
                id: id.to_string(),
                ancestors: thread.ancestors(id),
            });
        }
    }
    Ok(out)
}

/// Posts with at least one comment inside the window.
pub fn active_posts(corpus: &Corpus, window: &TimeWindow) -> BTreeSet<String> {
    corpus
        .threads
        .iter()
        .filter(|t| t.comments.values().any(|c| window.contains(c.created_at)))
        .map(|t| t.post.id.clone())
        .collect()
}

/// Top-level comments whose subtree has a comment inside the window.
pub fn active_tlcs(thread: &ThreadTree, window: &TimeWindow) -> BTreeSet<String> {
    thread
        .post
        .tlc_ids
        .iter()
        .filter(|tlc| {
            thread
                .subtree(tlc)
                .into_iter()
                .any(|id| window.contains(thread.comments[id].created_at))
        })
        .cloned()
        .collect()
}
