use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::model::EpochSeconds;

pub const MIN_SPAN_SECS: i64 = 8 * 60;
pub const MAX_SPAN_SECS: i64 = 24 * 60 * 60;

pub const DEFAULT_TOXICITY_THRESHOLD: f64 = 0.2;
pub const DEFAULT_SCORE_THRESHOLD: i64 = 10;
pub const DEFAULT_BINS: usize = 48;
pub const DEFAULT_BUCKETS: usize = 20;

/// Cutoffs for "toxic" and "highly scored". Both comparisons are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricThresholds {
    pub toxicity_threshold: f64,
    pub score_threshold: i64,
}

impl Default for MetricThresholds {
    fn default() -> Self {
        Self {
            toxicity_threshold: DEFAULT_TOXICITY_THRESHOLD,
            score_threshold: DEFAULT_SCORE_THRESHOLD,
        }
    }
}

impl MetricThresholds {
    pub fn new(toxicity_threshold: f64, score_threshold: i64) -> Result<Self, AnalyticsError> {
        if !(0.0..=1.0).contains(&toxicity_threshold) {
            return Err(AnalyticsError::InvalidThreshold(toxicity_threshold));
        }
        Ok(Self {
            toxicity_threshold,
            score_threshold,
        })
    }
}

/// The closed interval `[anchor - span, anchor]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub anchor: EpochSeconds,
    /// Seconds.
    pub span: i64,
}

impl TimeWindow {
    pub fn new(anchor: EpochSeconds, span: i64) -> Result<Self, AnalyticsError> {
        if !(MIN_SPAN_SECS..=MAX_SPAN_SECS).contains(&span) {
            return Err(AnalyticsError::InvalidSpan(span));
        }
        Ok(Self { anchor, span })
    }

    /// Like [`TimeWindow::new`] but pulls the span into range.
    pub fn clamped(anchor: EpochSeconds, span: i64) -> Self {
        Self {
            anchor,
            span: span.clamp(MIN_SPAN_SECS, MAX_SPAN_SECS),
        }
    }

    pub fn start(&self) -> EpochSeconds {
        self.anchor - self.span
    }

    pub fn contains(&self, t: EpochSeconds) -> bool {
        self.start() <= t && t <= self.anchor
    }

    /// Index of the uniform bin holding `t`. Bins are right-open except the
    /// last, which also holds the anchor itself.
    pub fn bin_of(&self, t: EpochSeconds, bins: usize) -> Option<usize> {
        if !self.contains(t) || bins == 0 {
            return None;
        }
        let idx = (i128::from(t - self.start()) * bins as i128) / i128::from(self.span);
        Some((idx as usize).min(bins - 1))
    }

    pub fn bin_edges(&self, bins: usize) -> Vec<f64> {
        let start = self.start() as f64;
        let width = self.span as f64 / bins as f64;
        (0..=bins)
            .map(|i| if i == bins { self.anchor as f64 } else { start + i as f64 * width })
            .collect()
    }
}

/// Defaults a fresh installation starts from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyticsConfig {
    pub thresholds: MetricThresholds,
    pub span: i64,
    pub bins: usize,
    pub buckets: usize,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        Self {
            thresholds: MetricThresholds::default(),
            span: MAX_SPAN_SECS,
            bins: DEFAULT_BINS,
            buckets: DEFAULT_BUCKETS,
        }
    }
}

impl AnalyticsConfig {
    pub fn span(&self) -> i64 {
        self.span.clamp(MIN_SPAN_SECS, MAX_SPAN_SECS)
    }

    pub fn window(&self, anchor: EpochSeconds) -> TimeWindow {
        TimeWindow::clamped(anchor, self.span)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn span_bounds() {
        assert!(TimeWindow::new(0, MIN_SPAN_SECS - 1).is_err());
        assert!(TimeWindow::new(0, MAX_SPAN_SECS + 1).is_err());
        assert!(TimeWindow::new(0, MIN_SPAN_SECS).is_ok());
        assert_eq!(TimeWindow::clamped(0, 1).span, 480);
        assert_eq!(TimeWindow::clamped(0, 10 * 86_400).span, 86_400);
    }

    #[test]
    fn anchor_lands_in_last_bin() {
        let w = TimeWindow::new(1000, 480).unwrap();
        assert_eq!(w.bin_of(1000, 48), Some(47));
        assert_eq!(w.bin_of(520, 48), Some(0));
        assert_eq!(w.bin_of(519, 48), None);
        assert_eq!(w.bin_of(1001, 48), None);
        // 480 s over 48 bins is 10 s per bin.
        assert_eq!(w.bin_of(529, 48), Some(0));
        assert_eq!(w.bin_of(530, 48), Some(1));
    }

    #[test]
    fn edges_are_uniform() {
        let w = TimeWindow::new(1000, 600).unwrap();
        let e = w.bin_edges(4);
        assert_eq!(e, [400.0, 550.0, 700.0, 850.0, 1000.0]);
    }

    #[test]
    fn fresh_defaults() {
        let c = AnalyticsConfig::default();
        assert_eq!(c.thresholds.toxicity_threshold, 0.2);
        assert_eq!(c.thresholds.score_threshold, 10);
        assert_eq!(c.bins, 48);
        assert_eq!(c.buckets, 20);
        assert!((MIN_SPAN_SECS..=MAX_SPAN_SECS).contains(&c.span()));
    }
}
