//! Offline export of every aggregate for one window.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    active_posts, active_tlcs, breakdown, histogram, sort_posts, thread_series, tlc_series, AnalyticsError,
    BreakdownBar, Histogram, HistogramMetric, MetricThresholds, SortKey, TemporalSeries, TimeWindow,
};
use crate::model::{Corpus, EpochSeconds, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub subreddit: String,
    pub window: TimeWindow,
    pub thresholds: MetricThresholds,
    pub bins: usize,
    pub histograms: ReportHistograms,
    pub orderings: BTreeMap<SortKey, Vec<String>>,
    pub posts: Vec<PostReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHistograms {
    pub toxicity: Histogram,
    /// Absent when the corpus has no comments.
    pub score: Option<Histogram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostReport {
    pub id: String,
    pub title: String,
    pub created_at: EpochSeconds,
    pub active: bool,
    pub breakdown: BreakdownBar,
    pub series: TemporalSeries,
    pub tlcs: Vec<TlcReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlcReport {
    pub id: String,
    pub active: bool,
    pub series: TemporalSeries,
}

pub fn build_report(
    corpus: &Corpus,
    window: &TimeWindow,
    thresholds: &MetricThresholds,
    bins: usize,
    buckets: usize,
) -> Result<Report, AnalyticsError> {
    let score = match histogram(corpus, HistogramMetric::Score, buckets) {
        Ok(h) => Some(h),
        Err(AnalyticsError::EmptyCorpus) => None,
        Err(e) => return Err(e),
    };
    let histograms = ReportHistograms {
        toxicity: histogram(corpus, HistogramMetric::Toxicity, buckets)?,
        score,
    };
    let orderings = SortKey::ALL
        .into_iter()
        .map(|k| Ok((k, sort_posts(corpus, k, thresholds, window)?)))
        .collect::<Result<_, AnalyticsError>>()?;
    let active = active_posts(corpus, window);
    let posts = corpus
        .threads
        .iter()
        .map(|t| {
            let live_tlcs = active_tlcs(t, window);
            let tlcs = t
                .post
                .tlc_ids
                .iter()
                .map(|id| {
                    Ok(TlcReport {
                        id: id.clone(),
                        active: live_tlcs.contains(id),
                        series: tlc_series(t, id, window, bins, thresholds)?,
                    })
                })
                .collect::<Result<_, AnalyticsError>>()?;
            Ok(PostReport {
                id: t.post.id.clone(),
                title: t.post.title.clone(),
                created_at: t.post.created_at,
                active: active.contains(&t.post.id),
                breakdown: breakdown(t, thresholds, window)?,
                series: thread_series(t, window, bins, thresholds)?,
                tlcs,
            })
        })
        .collect::<Result<_, AnalyticsError>>()?;
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        subreddit: corpus.subreddit.clone(),
        window: *window,
        thresholds: *thresholds,
        bins,
        histograms,
        orderings,
        posts,
    })
}
