//! Window-relative moderation metrics.
//!
//! Everything here is a pure function of an immutable corpus snapshot, a
//! [`TimeWindow`] and a set of [`MetricThresholds`]. Tombstoned comments
//! count as activity but are never toxic or highly scored.

mod classify;
mod histogram;
mod report;
mod series;
mod triage;
mod window;

use thiserror::Error;

pub use classify::{breakdown, classify, BreakdownBar, ClassSet, CommentClass};
pub use histogram::{histogram, Histogram, HistogramMetric};
pub use report::{build_report, PostReport, Report, ReportHistograms, TlcReport};
pub use series::{temporal_series, thread_series, tlc_series, TemporalSeries};
pub use triage::{active_posts, active_tlcs, filter_comments, post_key, sort_posts, FilterMatch, PostKey, SortKey};
pub use window::{
    AnalyticsConfig, MetricThresholds, TimeWindow, DEFAULT_BINS, DEFAULT_BUCKETS, DEFAULT_SCORE_THRESHOLD,
    DEFAULT_TOXICITY_THRESHOLD, MAX_SPAN_SECS, MIN_SPAN_SECS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("comment {0} has no toxicity score")]
    UnscoredComment(String),
    #[error("bin count must be at least 1")]
    InvalidBinCount,
    #[error("bucket count must be at least 1")]
    InvalidBucketCount,
    #[error("score histogram of an empty corpus is undefined")]
    EmptyCorpus,
    #[error("{0} is not a top-level comment of this thread")]
    UnknownTlc(String),
    #[error("toxicity threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("window span {0} s outside [{MIN_SPAN_SECS}, {MAX_SPAN_SECS}]")]
    InvalidSpan(i64),
    #[error("unknown comment class {0:?}")]
    UnknownClass(String),
    #[error("unknown sort key {0:?}")]
    UnknownSortKey(String),
}
