use serde::{Deserialize, Serialize};

use super::{classify, AnalyticsError, MetricThresholds, TimeWindow};
use crate::model::{Comment, ThreadTree};

/// Per-bin comment counts across a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalSeries {
    pub bin_edges: Vec<f64>,
    pub total: Vec<u64>,
    pub toxic: Vec<u64>,
    pub high_score: Vec<u64>,
}

impl TemporalSeries {
    pub fn bins(&self) -> usize {
        self.total.len()
    }

    /// Index of the bin with the most toxic comments; earliest wins ties.
    pub fn toxic_peak(&self) -> Option<usize> {
        self.toxic
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, u64)>, (i, &v)| match best {
                Some((_, b)) if b >= v => best,
                _ => Some((i, v)),
            })
            .map(|(i, _)| i)
    }
}

pub fn temporal_series<'a>(
    comments: impl IntoIterator<Item = &'a Comment>,
    window: &TimeWindow,
    bins: usize,
    thresholds: &MetricThresholds,
) -> Result<TemporalSeries, AnalyticsError> {
    if bins == 0 {
        return Err(AnalyticsError::InvalidBinCount);
    }
    let mut series = TemporalSeries {
        bin_edges: window.bin_edges(bins),
        total: vec![0; bins],
        toxic: vec![0; bins],
        high_score: vec![0; bins],
    };
    for c in comments {
        let Some(i) = window.bin_of(c.created_at, bins) else { continue };
        let class = classify(c, thresholds)?;
        series.total[i] += 1;
        series.toxic[i] += u64::from(class.is_toxic());
        series.high_score[i] += u64::from(class.is_high_score());
    }
    Ok(series)
}

/// Series over every comment of a thread.
pub fn thread_series(
    thread: &ThreadTree,
    window: &TimeWindow,
    bins: usize,
    thresholds: &MetricThresholds,
) -> Result<TemporalSeries, AnalyticsError> {
    temporal_series(thread.comments.values(), window, bins, thresholds)
}

/// Series over a top-level comment and all of its replies, flattened.
pub fn tlc_series(
    thread: &ThreadTree,
    tlc_id: &str,
    window: &TimeWindow,
    bins: usize,
    thresholds: &MetricThresholds,
) -> Result<TemporalSeries, AnalyticsError> {
    let is_tlc = thread.comments.get(tlc_id).is_some_and(|c| c.parent_id.is_none());
    if !is_tlc {
        return Err(AnalyticsError::UnknownTlc(tlc_id.to_string()));
    }
    let members = thread.subtree(tlc_id).into_iter().map(|id| &thread.comments[id]);
    temporal_series(members, window, bins, thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PostHeader;

    fn c(id: &str, parent: Option<&str>, t: i64, tox: f64) -> Comment {
        Comment {
            id: id.into(),
            parent_id: parent.map(Into::into),
            post_id: "p".into(),
            author: "a".into(),
            body: "b".into(),
            created_at: t,
            score: 0,
            toxicity: Some(tox),
            depth: 0,
            orphaned: false,
            tombstone: false,
        }
    }

    fn tree(comments: Vec<Comment>) -> ThreadTree {
        let header = PostHeader {
            id: "p".into(),
            title: "t".into(),
            author: "a".into(),
            created_at: 0,
            score: 0,
        };
        ThreadTree::build(header, comments).unwrap()
    }

    #[test]
    fn zero_bins_rejected() {
        let w = TimeWindow::new(1000, 600).unwrap();
        assert_eq!(
            temporal_series(std::iter::empty(), &w, 0, &MetricThresholds::default()),
            Err(AnalyticsError::InvalidBinCount)
        );
    }

    #[test]
    fn empty_and_anchor_cases() {
        let w = TimeWindow::new(1000, 600).unwrap();
        let t = MetricThresholds::default();
        let s = temporal_series(std::iter::empty(), &w, 6, &t).unwrap();
        assert_eq!(s.total, [0; 6]);
        let at_anchor = [c("x", None, 1000, 0.9)];
        let s = temporal_series(&at_anchor, &w, 6, &t).unwrap();
        assert_eq!(s.total, [0, 0, 0, 0, 0, 1]);
        assert_eq!(s.toxic, [0, 0, 0, 0, 0, 1]);
        assert_eq!(s.bin_edges.len(), 7);
    }

    #[test]
    fn tlc_series_cases() {
        let w = TimeWindow::new(1000, 600).unwrap();
        let t = MetricThresholds::default();
        let th = tree(vec![
            c("leaf", None, 10, 0.1),
            c("root", None, 500, 0.1),
            c("r1", Some("root"), 600, 0.5),
            c("r2", Some("r1"), 990, 0.5),
        ]);
        assert_eq!(tlc_series(&th, "leaf", &w, 4, &t).unwrap().total, [0; 4]);
        assert_eq!(tlc_series(&th, "root", &w, 4, &t).unwrap().total, [1, 1, 0, 1]);
        assert_eq!(
            tlc_series(&th, "r1", &w, 4, &t),
            Err(AnalyticsError::UnknownTlc("r1".into()))
        );
        assert_eq!(
            tlc_series(&th, "nope", &w, 4, &t),
            Err(AnalyticsError::UnknownTlc("nope".into()))
        );

        let single = tree(vec![c("root", None, 500, 0.1), c("r1", Some("root"), 600, 0.5)]);
        assert_eq!(
            tlc_series(&single, "root", &w, 8, &t).unwrap(),
            thread_series(&single, &w, 8, &t).unwrap()
        );
    }

    #[test]
    fn peak_prefers_earliest() {
        let s = TemporalSeries {
            bin_edges: vec![],
            total: vec![],
            toxic: vec![1, 3, 3, 0],
            high_score: vec![],
        };
        assert_eq!(s.toxic_peak(), Some(1));
    }
}
