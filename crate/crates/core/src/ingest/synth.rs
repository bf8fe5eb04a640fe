//! Seeded synthetic corpora for offline runs and property tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Comment, Corpus, EpochSeconds, PostHeader, ThreadTree, TreeError};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: i64,
    pub max: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeRange {
    pub start: EpochSeconds,
    pub end: EpochSeconds,
}

/// A burst of comments with a fixed toxicity, injected into one post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeConfig {
    pub post_index: i64,
    pub center: EpochSeconds,
    pub width: i64,
    pub count: i64,
    pub toxicity: f64,
}

impl SpikeConfig {
    /// Inclusive integer bounds lying inside `[center - width/2, center + width/2]`.
    pub fn bounds(&self) -> (EpochSeconds, EpochSeconds) {
        let half = self.width / 2;
        (self.center - half, self.center + half)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    #[serde(default = "default_subreddit")]
    pub subreddit: String,
    pub posts: i64,
    pub comments_per_post: CountRange,
    pub max_depth: i64,
    pub time_range: TimeRange,
    /// Chance that a comment replies to an earlier comment rather than the post.
    #[serde(default = "default_reply_probability")]
    pub reply_probability: f64,
    #[serde(default = "default_tombstone_rate")]
    pub tombstone_rate: f64,
    /// Attach background toxicity values so the corpus is usable unscored.
    #[serde(default = "default_prescore")]
    pub prescore: bool,
    #[serde(default)]
    pub spikes: Vec<SpikeConfig>,
}

fn default_subreddit() -> String {
    "synthetic".into()
}
fn default_reply_probability() -> f64 {
    0.7
}
fn default_tombstone_rate() -> f64 {
    0.02
}
fn default_prescore() -> bool {
    true
}

impl SyntheticConfig {
    pub fn new(posts: i64, comments: (i64, i64), max_depth: i64, time_range: (EpochSeconds, EpochSeconds)) -> Self {
        Self {
            subreddit: default_subreddit(),
            posts,
            comments_per_post: CountRange {
                min: comments.0,
                max: comments.1,
            },
            max_depth,
            time_range: TimeRange {
                start: time_range.0,
                end: time_range.1,
            },
            reply_probability: default_reply_probability(),
            tombstone_rate: default_tombstone_rate(),
            prescore: default_prescore(),
            spikes: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.posts < 0 {
            return bad(format!("posts must be non-negative, got {}", self.posts));
        }
        let CountRange { min, max } = self.comments_per_post;
        if min < 0 || max < min {
            return bad(format!("comments_per_post must satisfy 0 <= min <= max, got {min}..{max}"));
        }
        if self.max_depth < 0 {
            return bad(format!("max_depth must be non-negative, got {}", self.max_depth));
        }
        if self.time_range.end < self.time_range.start {
            return bad("time_range.end precedes time_range.start".into());
        }
        for (name, p) in [("reply_probability", self.reply_probability), ("tombstone_rate", self.tombstone_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        for (i, s) in self.spikes.iter().enumerate() {
            if s.post_index < 0 || s.post_index >= self.posts {
                return bad(format!("spikes[{i}].post_index {} out of range", s.post_index));
            }
            if s.width <= 0 {
                return bad(format!("spikes[{i}].width must be positive, got {}", s.width));
            }
            if s.count < 0 {
                return bad(format!("spikes[{i}].count must be non-negative, got {}", s.count));
            }
            if !(0.0..=1.0).contains(&s.toxicity) {
                return bad(format!("spikes[{i}].toxicity must lie in [0, 1], got {}", s.toxicity));
            }
        }
        Ok(())
    }
}

const NEUTRAL_WORDS: &[&str] = &[
    "the", "saw", "sensor", "thread", "game", "season", "team", "question", "answer", "think", "really", "good",
    "point", "source", "update", "thanks", "agree", "maybe", "weather", "city", "park", "road", "build", "price",
    "market", "coffee", "morning", "history", "because", "actually", "pretty", "sure", "people", "work", "news",
    "photo", "comment", "reply", "vote", "mod", "rule", "post", "link", "week", "today", "night", "local", "store",
];

/// Words the built-in scoring lexicon knows.
pub const HOSTILE_WORDS: &[&str] = &[
    "idiot", "stupid", "moron", "jerk", "dumb", "trash", "loser", "pathetic", "clown", "hate",
];

#[derive(Clone, Copy)]
enum Origin {
    Background,
    Spike(f64),
}

/// Generate a corpus. Identical `(config, seed)` pairs give identical output.
pub fn generate_synthetic(config: &SyntheticConfig, seed: u64) -> Result<Corpus, SynthError> {
    config.validate()?;
    let threads = (0..config.posts as usize)
        .map(|i| generate_thread(config, seed, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Corpus {
        subreddit: config.subreddit.clone(),
        fetched_at: config.time_range.end,
        threads,
    })
}

fn generate_thread(config: &SyntheticConfig, seed: u64, index: usize) -> Result<ThreadTree, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    let TimeRange { start, end } = config.time_range;
    let background_tox = Beta::new(0.6, 4.0).expect("valid beta parameters");

    let post_id = format!("p{index:04}");
    let post_created = rng.random_range(start..=end);
    let title = format!("{} {}", capitalize(pick(&mut rng, NEUTRAL_WORDS)), words(&mut rng, NEUTRAL_WORDS, 3, 7));

    let n = rng.random_range(config.comments_per_post.min..=config.comments_per_post.max) as usize;
    let mut entries: Vec<(EpochSeconds, Origin)> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let offset = ((end - post_created) as f64 * u.powf(1.5)).floor() as i64;
            (post_created + offset, Origin::Background)
        })
        .collect();
    for spike in config.spikes.iter().filter(|s| s.post_index as usize == index) {
        let (lo, hi) = spike.bounds();
        for _ in 0..spike.count {
            entries.push((rng.random_range(lo..=hi), Origin::Spike(spike.toxicity)));
        }
    }
    // Stable: equal timestamps keep generation order.
    entries.sort_by_key(|e| e.0);

    let mut comments: Vec<Comment> = Vec::with_capacity(entries.len());
    let mut depths: Vec<u32> = Vec::with_capacity(entries.len());
    for (j, (created_at, origin)) in entries.into_iter().enumerate() {
        let candidates: Vec<usize> = (0..comments.len()).filter(|&k| (depths[k] as i64) < config.max_depth).collect();
        let parent = if !candidates.is_empty() && rng.random_bool(config.reply_probability) {
            Some(candidates[rng.random_range(0..candidates.len())])
        } else {
            None
        };
        let tombstone = matches!(origin, Origin::Background) && rng.random_bool(config.tombstone_rate);
        let (body, toxicity, score) = match origin {
            Origin::Spike(level) => {
                let insult = words(&mut rng, HOSTILE_WORDS, 1, 3);
                let filler = words(&mut rng, NEUTRAL_WORDS, 2, 8);
                (format!("{filler} {insult}"), Some(level), rng.random_range(-8..=3))
            }
            Origin::Background => {
                let tox: f64 = background_tox.sample(&mut rng);
                let mut body = words(&mut rng, NEUTRAL_WORDS, 4, 24);
                if rng.random_bool(tox) {
                    body.push(' ');
                    body.push_str(pick(&mut rng, HOSTILE_WORDS));
                }
                (body, Some(tox), background_score(&mut rng))
            }
        };
        depths.push(parent.map_or(0, |p| depths[p] + 1));
        comments.push(Comment {
            id: format!("{post_id}_c{j:05}"),
            parent_id: parent.map(|p| comments[p].id.clone()),
            post_id: post_id.clone(),
            author: format!("user{}", rng.random_range(0..400)),
            body: if tombstone { "[deleted]".into() } else { body },
            created_at,
            score,
            toxicity: if tombstone || !config.prescore { None } else { toxicity },
            depth: 0,
            orphaned: false,
            tombstone,
        });
    }

    let header = PostHeader {
        id: post_id,
        title,
        author: format!("user{}", rng.random_range(0..400)),
        created_at: post_created,
        score: background_score(&mut rng) * 3,
    };
    Ok(ThreadTree::build(header, comments)?)
}

/// Heavy right tail with an occasional pile-on of downvotes.
fn background_score(rng: &mut ChaCha8Rng) -> i64 {
    let u: f64 = rng.random_range(f64::EPSILON..1.0);
    if rng.random_bool(0.12) {
        -((-u.ln() * 4.0).floor() as i64)
    } else {
        (-u.ln() * 6.0).floor() as i64 - 2
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, vocab: &[&'a str]) -> &'a str {
    vocab[rng.random_range(0..vocab.len())]
}

fn words(rng: &mut ChaCha8Rng, vocab: &[&str], min: usize, max: usize) -> String {
    let n = rng.random_range(min..=max);
    (0..n).map(|_| pick(rng, vocab)).collect::<Vec<_>>().join(" ")
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}
