use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::model::Corpus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistogramMetric {
    Toxicity,
    Score,
}

/// Contiguous buckets `[edge[i], edge[i+1])`, the last one closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub metric: HistogramMetric,
    pub bucket_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Global distribution over the whole corpus; windows do not apply.
///
/// Toxicity covers scored, non-tombstone comments over `[0, 1]`. Score
/// covers every comment over the corpus' own `[min, max]` score range.
pub fn histogram(corpus: &Corpus, metric: HistogramMetric, buckets: usize) -> Result<Histogram, AnalyticsError> {
    if buckets == 0 {
        return Err(AnalyticsError::InvalidBucketCount);
    }
    let (lo, hi, values): (f64, f64, Vec<f64>) = match metric {
        HistogramMetric::Toxicity => {
            let values = corpus.comments().filter(|c| !c.tombstone).filter_map(|c| c.toxicity).collect();
            (0.0, 1.0, values)
        }
        HistogramMetric::Score => {
            let scores: Vec<i64> = corpus.comments().map(|c| c.score).collect();
            let (Some(&min), Some(&max)) = (scores.iter().min(), scores.iter().max()) else {
                return Err(AnalyticsError::EmptyCorpus);
            };
            (min as f64, max as f64, scores.into_iter().map(|s| s as f64).collect())
        }
    };
    let edges: Vec<f64> = (0..=buckets)
        .map(|i| if i == buckets { hi } else { lo + (hi - lo) * i as f64 / buckets as f64 })
        .collect();
    let mut counts = vec![0u64; buckets];
    for v in values {
        counts[bucket_index(v, &edges)] += 1;
    }
    Ok(Histogram {
        metric,
        bucket_edges: edges,
        counts,
    })
}

/// Bucket for `v`, consistent with the published edges. Out-of-range values
/// clamp to the first or last bucket.
fn bucket_index(v: f64, edges: &[f64]) -> usize {
    let n = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[n]);
    if hi <= lo || v <= lo {
        return 0;
    }
    let mut i = (((v - lo) / (hi - lo)) * n as f64).floor().clamp(0.0, (n - 1) as f64) as usize;
    while i > 0 && v < edges[i] {
        i -= 1;
    }
    while i + 1 < n && v >= edges[i + 1] {
        i += 1;
    }
    i
}
