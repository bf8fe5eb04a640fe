use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AnalyticsError, MetricThresholds, TimeWindow};
use crate::model::{Comment, ThreadTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommentClass {
    None,
    ToxicOnly,
    HighScoreOnly,
    Both,
}

impl CommentClass {
    pub const ALL: [CommentClass; 4] = [
        CommentClass::None,
        CommentClass::ToxicOnly,
        CommentClass::HighScoreOnly,
        CommentClass::Both,
    ];

    pub fn from_flags(toxic: bool, high_score: bool) -> Self {
        match (toxic, high_score) {
            (false, false) => CommentClass::None,
            (true, false) => CommentClass::ToxicOnly,
            (false, true) => CommentClass::HighScoreOnly,
            (true, true) => CommentClass::Both,
        }
    }

    pub fn is_toxic(self) -> bool {
        matches!(self, CommentClass::ToxicOnly | CommentClass::Both)
    }

    pub fn is_high_score(self) -> bool {
        matches!(self, CommentClass::HighScoreOnly | CommentClass::Both)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CommentClass::None => "none",
            CommentClass::ToxicOnly => "toxic_only",
            CommentClass::HighScoreOnly => "high_score_only",
            CommentClass::Both => "both",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for CommentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CommentClass {
    type Err = AnalyticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CommentClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| AnalyticsError::UnknownClass(s.to_string()))
    }
}

/// A subset of the four classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ClassSet(u8);

impl ClassSet {
    pub fn all() -> Self {
        CommentClass::ALL.into_iter().collect()
    }

    pub fn contains(self, class: CommentClass) -> bool {
        self.0 & class.bit() != 0
    }

    pub fn insert(&mut self, class: CommentClass) {
        self.0 |= class.bit();
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = CommentClass> {
        CommentClass::ALL.into_iter().filter(move |c| self.contains(*c))
    }
}

impl FromIterator<CommentClass> for ClassSet {
    fn from_iter<I: IntoIterator<Item = CommentClass>>(iter: I) -> Self {
        let mut s = ClassSet::default();
        for c in iter {
            s.insert(c);
        }
        s
    }
}

impl Serialize for ClassSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for ClassSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(Vec::<CommentClass>::deserialize(deserializer)?.into_iter().collect())
    }
}

/// Tombstones are always [`CommentClass::None`]; any other comment must be scored.
pub fn classify(comment: &Comment, thresholds: &MetricThresholds) -> Result<CommentClass, AnalyticsError> {
    if comment.tombstone {
        return Ok(CommentClass::None);
    }
    let toxicity = comment.toxicity.ok_or_else(|| AnalyticsError::UnscoredComment(comment.id.clone()))?;
    Ok(CommentClass::from_flags(
        toxicity >= thresholds.toxicity_threshold,
        comment.score >= thresholds.score_threshold,
    ))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakdownBar {
    pub toxic_only: u64,
    pub high_score_only: u64,
    pub both: u64,
    pub neither: u64,
    pub total: u64,
}

impl BreakdownBar {
    pub fn add(&mut self, class: CommentClass) {
        match class {
            CommentClass::None => self.neither += 1,
            CommentClass::ToxicOnly => self.toxic_only += 1,
            CommentClass::HighScoreOnly => self.high_score_only += 1,
            CommentClass::Both => self.both += 1,
        }
        self.total += 1;
    }

    pub fn toxic(&self) -> u64 {
        self.toxic_only + self.both
    }
}

/// Class counts over the thread's comments inside `window`.
pub fn breakdown(
    thread: &ThreadTree,
    thresholds: &MetricThresholds,
    window: &TimeWindow,
) -> Result<BreakdownBar, AnalyticsError> {
    let mut bar = BreakdownBar::default();
    for c in thread.comments.values().filter(|c| window.contains(c.created_at)) {
        bar.add(classify(c, thresholds)?);
    }
    Ok(bar)
}
