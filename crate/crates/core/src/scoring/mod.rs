//! Toxicity scoring behind a pluggable [`Scorer`].

mod cache;
mod lexicon;
mod remote;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::http::Sleeper;
use crate::model::{Corpus, EpochSeconds};

pub use cache::ScoreCache;
pub use lexicon::{score_lexicon, Lexicon, LexiconError, LexiconScorer};
pub use remote::{RemoteConfig, RemoteScorer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provider {
    Remote,
    Lexicon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScore")]
pub struct ToxicityScore {
    value: f64,
    provider: Provider,
    scored_at: EpochSeconds,
}

#[derive(Deserialize)]
struct RawScore {
    value: f64,
    provider: Provider,
    scored_at: EpochSeconds,
}

impl TryFrom<RawScore> for ToxicityScore {
    type Error = ScoreError;

    fn try_from(r: RawScore) -> Result<Self, Self::Error> {
        ToxicityScore::new(r.value, r.provider, r.scored_at)
    }
}

impl ToxicityScore {
    pub fn new(value: f64, provider: Provider, scored_at: EpochSeconds) -> Result<Self, ScoreError> {
        if !(0.0..=1.0).contains(&value) {
            return Err(ScoreError::OutOfRange(value));
        }
        Ok(Self {
            value,
            provider,
            scored_at,
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn provider(&self) -> Provider {
        self.provider
    }

    pub fn scored_at(&self) -> EpochSeconds {
        self.scored_at
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("comment body is empty")]
    EmptyBody,
    #[error("provider error: {0}")]
    ProviderError(String),
    #[error("provider quota exceeded")]
    QuotaExceeded,
    #[error("score {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("comment {id}: {source}")]
    Comment {
        id: String,
        #[source]
        source: Box<ScoreError>,
    },
}

pub trait Scorer: Send + Sync {
    fn provider(&self) -> Provider;

    fn score(&self, body: &str) -> Result<ToxicityScore, ScoreError>;

    /// Requests allowed in flight at once.
    fn max_in_flight(&self) -> usize {
        1
    }
}

pub type Clock = Arc<dyn Fn() -> EpochSeconds + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs() as i64)
            .unwrap_or(0)
    })
}

#[derive(Clone)]
pub struct BatchOptions {
    pub batch_size: usize,
    /// Pause between batches.
    pub pacing: Duration,
    pub sleeper: Sleeper,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            batch_size: 16,
            pacing: Duration::ZERO,
            sleeper: crate::http::thread_sleeper(),
        }
    }
}

/// Attach a toxicity value to every non-tombstone comment.
///
/// Comments already in `cache` are not sent to the scorer. New scores are
/// written to `cache` as they arrive, so a failed run can be resumed.
pub fn score_corpus(corpus: &Corpus, scorer: &dyn Scorer, cache: &mut ScoreCache) -> Result<Corpus, ScoreError> {
    score_corpus_with(corpus, scorer, cache, &BatchOptions::default())
}

pub fn score_corpus_with(
    corpus: &Corpus,
    scorer: &dyn Scorer,
    cache: &mut ScoreCache,
    options: &BatchOptions,
) -> Result<Corpus, ScoreError> {
    let pending: Vec<(&str, &str)> = corpus
        .comments()
        .filter(|c| !c.tombstone && !cache.contains(&c.id))
        .map(|c| (c.id.as_str(), c.body.as_str()))
        .collect();

    for (n, batch) in pending.chunks(options.batch_size.max(1)).enumerate() {
        if n > 0 && !options.pacing.is_zero() {
            (options.sleeper)(options.pacing);
        }
        let results = score_batch(batch, scorer);
        let mut first_error = None;
        for ((id, _), result) in batch.iter().zip(results) {
            match result {
                Ok(score) => cache.insert((*id).to_string(), score),
                Err(e) if first_error.is_none() => {
                    first_error = Some(ScoreError::Comment {
                        id: (*id).to_string(),
                        source: Box::new(e),
                    })
                }
                Err(_) => {}
            }
        }
        if let Some(e) = first_error {
            return Err(e);
        }
    }

    let mut out = corpus.clone();
    for thread in &mut out.threads {
        for c in thread.comments.values_mut() {
            c.toxicity = if c.tombstone {
                None
            } else {
                cache.get(&c.id).map(ToxicityScore::value)
            };
        }
    }
    Ok(out)
}

fn score_batch(batch: &[(&str, &str)], scorer: &dyn Scorer) -> Vec<Result<ToxicityScore, ScoreError>> {
    let workers = scorer.max_in_flight().clamp(1, batch.len().max(1));
    if workers == 1 {
        return batch.iter().map(|(_, body)| scorer.score(body)).collect();
    }
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<ToxicityScore, ScoreError>>> = vec![None; batch.len()];
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some((_, body)) = batch.get(i) else { break };
                        done.push((i, scorer.score(body)));
                    }
                    done
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("scoring worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|r| r.expect("every slot scored")).collect()
}
