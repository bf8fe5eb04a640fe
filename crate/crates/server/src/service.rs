//! Transport-independent operations behind the HTTP routes.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use threadscope_core::analytics::{
    active_posts, active_tlcs, breakdown, classify, filter_comments, histogram, sort_posts, thread_series,
    tlc_series, AnalyticsError, BreakdownBar, CommentClass, FilterMatch, Histogram, HistogramMetric,
    MetricThresholds, SortKey, TemporalSeries, TimeWindow, DEFAULT_BUCKETS,
};
use threadscope_core::model::{CacheError, EpochSeconds};
use threadscope_core::{Comment, Corpus, ThreadTree};

use crate::actions::{ActionKind, ActionLog, LogError, ModerationAction};
use crate::query::{QueryError, QueryParams};
use crate::telemetry::Telemetry;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("no corpus is loaded")]
    CorpusNotLoaded,
    #[error("unknown post {0}")]
    UnknownPost(String),
    #[error("unknown comment {0}")]
    UnknownComment(String),
    #[error("corpus schema_version {found:?} is not supported")]
    SchemaMismatch { found: Option<u64> },
    #[error("corrupt corpus: {0}")]
    CorruptCache(String),
    #[error("cannot read corpus: {0}")]
    CorpusUnreadable(String),
    #[error("storage failure: {0}")]
    StorageFailure(#[from] LogError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

impl From<CacheError> for ServiceError {
    fn from(e: CacheError) -> Self {
        match e {
            CacheError::SchemaMismatch { found } => ServiceError::SchemaMismatch { found },
            CacheError::Corrupt(m) => ServiceError::CorruptCache(m),
            io @ CacheError::Io { .. } => ServiceError::CorpusUnreadable(io.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histograms {
    pub toxicity: Histogram,
    /// Null for a corpus without comments.
    pub score: Option<Histogram>,
}

/// An immutable loaded corpus plus everything that does not depend on a query.
#[derive(Debug)]
pub struct Snapshot {
    pub corpus: Corpus,
    pub source: Option<PathBuf>,
    pub histograms: Histograms,
    comment_ids: BTreeSet<String>,
}

impl Snapshot {
    pub fn new(corpus: Corpus, source: Option<PathBuf>) -> Result<Self, ServiceError> {
        corpus.validate().map_err(|e| ServiceError::CorruptCache(e.to_string()))?;
        let score = match histogram(&corpus, HistogramMetric::Score, DEFAULT_BUCKETS) {
            Ok(h) => Some(h),
            Err(AnalyticsError::EmptyCorpus) => None,
            Err(e) => return Err(e.into()),
        };
        let histograms = Histograms {
            toxicity: histogram(&corpus, HistogramMetric::Toxicity, DEFAULT_BUCKETS)?,
            score,
        };
        let unscored = corpus.comments().filter(|c| !c.tombstone && c.toxicity.is_none()).count();
        if unscored > 0 {
            tracing::warn!(unscored, "corpus has unscored comments; window queries will fail until it is scored");
        }
        let comment_ids = corpus.comments().map(|c| c.id.clone()).collect();
        Ok(Self {
            corpus,
            source,
            histograms,
            comment_ids,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        Self::new(Corpus::load(path)?, Some(path.to_path_buf()))
    }

    pub fn contains_comment(&self, id: &str) -> bool {
        self.comment_ids.contains(id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostSummary {
    pub id: String,
    pub title: String,
    pub author: String,
    pub created_at: EpochSeconds,
    pub score: i64,
    pub comment_count: usize,
    pub active: bool,
    pub breakdown: BreakdownBar,
    pub series: TemporalSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostPage {
    /// Posts matching the query across all pages.
    pub total: usize,
    pub page: usize,
    pub page_size: usize,
    pub out_of_range: bool,
    pub sort: SortKey,
    pub window: TimeWindow,
    pub thresholds: MetricThresholds,
    pub posts: Vec<PostSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedComment {
    #[serde(flatten)]
    pub comment: Comment,
    pub class: CommentClass,
    /// Latest moderation action, if any. Display state only.
    pub moderation: Option<ActionKind>,
    /// Included only as an ancestor of a filter match.
    pub context_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlcDetail {
    pub id: String,
    pub active: bool,
    pub series: TemporalSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadDetail {
    pub post: PostSummary,
    pub window: TimeWindow,
    pub thresholds: MetricThresholds,
    /// Display order: depth-first, siblings oldest first.
    pub comments: Vec<AnnotatedComment>,
    pub tlcs: Vec<TlcDetail>,
    pub active_tlcs: Vec<String>,
    /// Present when the query carried a class filter.
    pub matches: Option<Vec<FilterMatch>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionsView {
    pub actions: Vec<ModerationAction>,
    pub effective: BTreeMap<String, ActionKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub corpus_loaded: bool,
    pub subreddit: Option<String>,
    pub posts: usize,
    pub comments: usize,
    pub actions: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub requests: Option<BTreeMap<String, u64>>,
}

pub use threadscope_core::scoring::{system_clock, Clock};

/// Shared state: the current snapshot, the moderation log and a clock.
pub struct Service {
    snapshot: RwLock<Option<Arc<Snapshot>>>,
    log: ActionLog,
    clock: Clock,
    telemetry: Telemetry,
}

impl std::fmt::Debug for Service {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Service").field("log", &self.log).finish_non_exhaustive()
    }
}

fn summary(
    thread: &ThreadTree,
    active: bool,
    window: &TimeWindow,
    q: &QueryParams,
) -> Result<PostSummary, AnalyticsError> {
    Ok(PostSummary {
        id: thread.post.id.clone(),
        title: thread.post.title.clone(),
        author: thread.post.author.clone(),
        created_at: thread.post.created_at,
        score: thread.post.score,
        comment_count: thread.comments.len(),
        active,
        breakdown: breakdown(thread, &q.thresholds, window)?,
        series: thread_series(thread, window, q.bins, &q.thresholds)?,
    })
}

impl Service {
    pub fn new(log: ActionLog, clock: Clock, telemetry: Telemetry) -> Self {
        Self {
            snapshot: RwLock::new(None),
            log,
            clock,
            telemetry,
        }
    }

    pub fn telemetry(&self) -> &Telemetry {
        &self.telemetry
    }

    /// Reads and validates `path`, then swaps it in. In-flight requests keep
    /// the snapshot they started with.
    pub fn load_corpus(&self, path: &Path) -> Result<Arc<Snapshot>, ServiceError> {
        let snap = Arc::new(Snapshot::load(path)?);
        self.install(snap.clone());
        Ok(snap)
    }

    pub fn install(&self, snapshot: Arc<Snapshot>) {
        tracing::info!(
            subreddit = %snapshot.corpus.subreddit,
            posts = snapshot.corpus.threads.len(),
            comments = snapshot.corpus.comment_count(),
            "corpus snapshot installed"
        );
        *self.snapshot.write().unwrap_or_else(|p| p.into_inner()) = Some(snapshot);
    }

    /// Re-reads the file the current snapshot came from.
    pub fn reload(&self) -> Result<Arc<Snapshot>, ServiceError> {
        let source = self.snapshot()?.source.clone().ok_or(ServiceError::CorpusNotLoaded)?;
        self.load_corpus(&source)
    }

    pub fn snapshot(&self) -> Result<Arc<Snapshot>, ServiceError> {
        self.snapshot
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .clone()
            .ok_or(ServiceError::CorpusNotLoaded)
    }

    pub fn list_posts(&self, q: &QueryParams) -> Result<PostPage, ServiceError> {
        let snap = self.snapshot()?;
        let corpus = &snap.corpus;
        let window = q.window(corpus.fetched_at);
        let active = active_posts(corpus, &window);
        let ordered: Vec<String> = sort_posts(corpus, q.sort, &q.thresholds, &window)?
            .into_iter()
            .filter(|id| q.show_inactive || active.contains(id))
            .collect();
        let total = ordered.len();
        let start = q.page.saturating_mul(q.page_size);
        let out_of_range = start >= total && q.page > 0;
        let posts = ordered
            .iter()
            .skip(start)
            .take(q.page_size)
            .map(|id| {
                let thread = corpus.thread(id).expect("sorted ids come from the corpus");
                summary(thread, active.contains(id), &window, q)
            })
            .collect::<Result<_, _>>()?;
        Ok(PostPage {
            total,
            page: q.page,
            page_size: q.page_size,
            out_of_range,
            sort: q.sort,
            window,
            thresholds: q.thresholds,
            posts,
        })
    }

    pub fn get_thread(&self, post_id: &str, q: &QueryParams) -> Result<ThreadDetail, ServiceError> {
        let snap = self.snapshot()?;
        let thread = snap
            .corpus
            .thread(post_id)
            .ok_or_else(|| ServiceError::UnknownPost(post_id.to_string()))?;
        let window = q.window(snap.corpus.fetched_at);
        let effective = self.log.effective();
        let live = active_tlcs(thread, &window);
        let post_active = thread.comments.values().any(|c| window.contains(c.created_at));

        let matches = q
            .filter
            .map(|classes| filter_comments(thread, classes, &q.thresholds))
            .transpose()?;
        // Ids to show, and whether each is a match in its own right.
        let shown: Option<BTreeMap<&str, bool>> = matches.as_ref().map(|ms| {
            let mut shown = BTreeMap::new();
            for m in ms {
                for a in &m.ancestors {
                    shown.entry(a.as_str()).or_insert(false);
                }
                shown.insert(m.id.as_str(), true);
            }
            shown
        });

        let mut comments = Vec::new();
        for id in thread.preorder() {
            let context_only = match &shown {
                None => false,
                Some(s) => match s.get(id) {
                    None => continue,
                    Some(&is_match) => !is_match,
                },
            };
            let c = &thread.comments[id];
            comments.push(AnnotatedComment {
                comment: c.clone(),
                class: classify(c, &q.thresholds)?,
                moderation: effective.get(id).copied(),
                context_only,
            });
        }
        let tlcs = thread
            .post
            .tlc_ids
            .iter()
            .map(|id| {
                Ok(TlcDetail {
                    id: id.clone(),
                    active: live.contains(id),
                    series: tlc_series(thread, id, &window, q.bins, &q.thresholds)?,
                })
            })
            .collect::<Result<_, AnalyticsError>>()?;
        Ok(ThreadDetail {
            post: summary(thread, post_active, &window, q)?,
            window,
            thresholds: q.thresholds,
            comments,
            tlcs,
            active_tlcs: live.into_iter().collect(),
            matches,
        })
    }

    pub fn get_histograms(&self) -> Result<Histograms, ServiceError> {
        Ok(self.snapshot()?.histograms.clone())
    }

    /// Validates the comment against the current snapshot, then appends.
    pub fn post_action(&self, kind: ActionKind, comment_id: &str, actor: &str) -> Result<ModerationAction, ServiceError> {
        let snap = self.snapshot()?;
        if !snap.contains_comment(comment_id) {
            return Err(ServiceError::UnknownComment(comment_id.to_string()));
        }
        Ok(self.log.append(comment_id, kind, actor, (self.clock)())?)
    }

    pub fn actions(&self) -> ActionsView {
        let actions = self.log.actions();
        let effective = crate::actions::effective_states(&actions);
        ActionsView { actions, effective }
    }

    pub fn health(&self) -> Health {
        let snap = self.snapshot().ok();
        Health {
            status: "ok".into(),
            corpus_loaded: snap.is_some(),
            subreddit: snap.as_ref().map(|s| s.corpus.subreddit.clone()),
            posts: snap.as_ref().map_or(0, |s| s.corpus.threads.len()),
            comments: snap.as_ref().map_or(0, |s| s.corpus.comment_count()),
            actions: self.log.len(),
            requests: self.telemetry.snapshot(),
        }
    }
}
