//! Subreddit collection over the provider's JSON listing API.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::listing::{build_tree, ListingError, OrphanPolicy, RawListing};
use crate::http::{Failure, HttpRequest, HttpResponse, RetryPolicy, Sleeper, Transport};
use crate::model::{Corpus, EpochSeconds};

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("span must be positive, got {0} s")]
    InvalidSpan(i64),
    #[error("invalid subreddit name {0:?}")]
    InvalidName(String),
    #[error("authentication failed: {0}")]
    AuthFailure(String),
    #[error("rate limited by provider after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("unexpected provider response from {url}: {detail}")]
    BadResponse { url: String, detail: String },
    #[error("post {post}: {source}")]
    Listing {
        post: String,
        #[source]
        source: ListingError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Credentials {
    /// A ready OAuth access token.
    Bearer { token: String },
    /// Application-only OAuth: exchanged for a token on first use.
    ClientCredentials { client_id: String, client_secret: String },
}

/// Endpoint layout and request knobs. Every field has a working default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub api_base: String,
    pub token_url: String,
    pub auth_header: String,
    /// Prefix placed before the token in `auth_header`.
    pub auth_scheme: String,
    pub user_agent: String,
    pub page_limit: u32,
    pub comment_limit: u32,
    /// Upper bound on listing pages walked per endpoint.
    pub max_pages: u32,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            api_base: "https://oauth.reddit.com".into(),
            token_url: "https://www.reddit.com/api/v1/access_token".into(),
            auth_header: "Authorization".into(),
            auth_scheme: "bearer".into(),
            user_agent: concat!("threadscope/", env!("CARGO_PKG_VERSION")).into(),
            page_limit: 100,
            comment_limit: 500,
            max_pages: 50,
        }
    }
}

const MORECHILDREN_BATCH: usize = 100;

pub struct FetchClient {
    transport: Arc<dyn Transport>,
    config: ProviderConfig,
    retry: RetryPolicy,
    sleeper: Sleeper,
}

impl FetchClient {
    pub fn new(transport: Arc<dyn Transport>, config: ProviderConfig, retry: RetryPolicy, sleeper: Sleeper) -> Self {
        Self {
            transport,
            config,
            retry,
            sleeper,
        }
    }

    /// Collect every post created or replied to within `[now - span, now]`,
    /// with its full comment tree.
    pub fn fetch_subreddit(
        &self,
        name: &str,
        span_secs: i64,
        credentials: &Credentials,
        now: EpochSeconds,
    ) -> Result<Corpus, FetchError> {
        if span_secs <= 0 {
            return Err(FetchError::InvalidSpan(span_secs));
        }
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(FetchError::InvalidName(name.into()));
        }
        let cutoff = now - span_secs;
        let session = Session {
            client: self,
            token: self.access_token(credentials)?,
        };
        let base = self.config.api_base.trim_end_matches('/');

        let mut post_ids: Vec<String> = Vec::new();
        let mut seen = BTreeSet::new();
        let new_url = format!("{base}/r/{name}/new.json?limit={}&raw_json=1", self.config.page_limit);
        session.walk_listing(&new_url, cutoff, |data| {
            let id = data["id"].as_str().map(String::from);
            (id, created(data))
        }, |id| {
            if seen.insert(id.clone()) {
                post_ids.push(id);
            }
        })?;
        let comments_url = format!("{base}/r/{name}/comments.json?limit={}&raw_json=1", self.config.page_limit);
        session.walk_listing(&comments_url, cutoff, |data| {
            let link = data["link_id"].as_str().map(|l| l.trim_start_matches("t3_").to_string());
            (link, created(data))
        }, |id| {
            if seen.insert(id.clone()) {
                post_ids.push(id);
            }
        })?;

        let mut threads = Vec::with_capacity(post_ids.len());
        for post in &post_ids {
            let listing = session.expanded_listing(base, post)?;
            let tree = build_tree(listing, OrphanPolicy::Promote).map_err(|source| FetchError::Listing {
                post: post.clone(),
                source,
            })?;
            threads.push(tree);
        }
        tracing::info!(subreddit = name, posts = threads.len(), "fetch complete");
        Ok(Corpus {
            subreddit: name.to_string(),
            fetched_at: now,
            threads,
        })
    }

    fn access_token(&self, credentials: &Credentials) -> Result<String, FetchError> {
        match credentials {
            Credentials::Bearer { token } => Ok(token.clone()),
            Credentials::ClientCredentials {
                client_id,
                client_secret,
            } => {
                let basic = base64::engine::general_purpose::STANDARD.encode(format!("{client_id}:{client_secret}"));
                let request = HttpRequest::post(&self.config.token_url, "grant_type=client_credentials")
                    .header("Authorization", format!("Basic {basic}"))
                    .header("Content-Type", "application/x-www-form-urlencoded")
                    .header("User-Agent", &self.config.user_agent);
                let response = self.send(&request)?;
                let body: Value = parse_body(&request.url, &response)?;
                body["access_token"]
                    .as_str()
                    .map(String::from)
                    .ok_or_else(|| FetchError::AuthFailure("token response has no access_token".into()))
            }
        }
    }

    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, FetchError> {
        let response = self.retry.run(&self.sleeper, || match self.transport.send(request) {
            Err(e) => Err(Failure::Transient(FetchError::ProviderUnavailable(e.0))),
            Ok(r) if r.is_success() => Ok(r),
            Ok(r) => Err(classify_status(&r, self.retry.attempts)),
        })?;
        self.honor_rate_limit(&response);
        Ok(response)
    }

    fn honor_rate_limit(&self, response: &HttpResponse) {
        let remaining = response.header("x-ratelimit-remaining").and_then(|v| v.trim().parse::<f64>().ok());
        let reset = response.header("x-ratelimit-reset").and_then(|v| v.trim().parse::<f64>().ok());
        if let (Some(remaining), Some(reset)) = (remaining, reset) {
            if remaining < 1.0 && reset > 0.0 {
                tracing::debug!(reset, "rate limit window exhausted, pausing");
                (self.sleeper)(std::time::Duration::from_secs_f64(reset));
            }
        }
    }
}

fn classify_status(r: &HttpResponse, attempts: u32) -> Failure<FetchError> {
    match r.status {
        401 | 403 => Failure::Permanent(FetchError::AuthFailure(format!("status {}", r.status))),
        429 => Failure::Transient(FetchError::RateLimited { attempts }),
        s if s >= 500 => Failure::Transient(FetchError::ProviderUnavailable(format!("status {s}"))),
        s => Failure::Permanent(FetchError::ProviderUnavailable(format!("status {s}"))),
    }
}

fn parse_body(url: &str, response: &HttpResponse) -> Result<Value, FetchError> {
    serde_json::from_str(&response.body).map_err(|e| FetchError::BadResponse {
        url: url.to_string(),
        detail: e.to_string(),
    })
}

fn created(data: &Value) -> Option<EpochSeconds> {
    data["created_utc"].as_f64().map(|f| f.floor() as i64)
}

struct Session<'a> {
    client: &'a FetchClient,
    token: String,
}

impl Session<'_> {
    fn get(&self, url: &str) -> Result<Value, FetchError> {
        let cfg = &self.client.config;
        let request = HttpRequest::get(url)
            .header(&cfg.auth_header, format!("{} {}", cfg.auth_scheme, self.token).trim().to_string())
            .header("User-Agent", &cfg.user_agent);
        let response = self.client.send(&request)?;
        parse_body(url, &response)
    }

    /// Walk a newest-first listing until items fall before `cutoff`.
    fn walk_listing(
        &self,
        first_url: &str,
        cutoff: EpochSeconds,
        extract: impl Fn(&Value) -> (Option<String>, Option<EpochSeconds>),
        mut keep: impl FnMut(String),
    ) -> Result<(), FetchError> {
        let mut after: Option<String> = None;
        for _ in 0..self.client.config.max_pages {
            let url = match &after {
                Some(a) => format!("{first_url}&after={a}"),
                None => first_url.to_string(),
            };
            let page = self.get(&url)?;
            let children = page.pointer("/data/children").and_then(Value::as_array).ok_or_else(|| {
                FetchError::BadResponse {
                    url: url.clone(),
                    detail: "missing data.children".into(),
                }
            })?;
            let mut reached_cutoff = false;
            for child in children {
                let (id, ts) = extract(&child["data"]);
                match (id, ts) {
                    (Some(id), Some(ts)) if ts >= cutoff => keep(id),
                    (_, Some(_)) => reached_cutoff = true,
                    _ => {}
                }
            }
            after = page.pointer("/data/after").and_then(Value::as_str).map(String::from);
            if reached_cutoff || after.is_none() {
                break;
            }
        }
        Ok(())
    }

    /// One post's comment page with `more` stubs and depth cut-offs expanded.
    fn expanded_listing(&self, base: &str, post: &str) -> Result<RawListing, FetchError> {
        let limit = self.client.config.comment_limit;
        let page = self.get(&format!("{base}/comments/{post}.json?limit={limit}&raw_json=1"))?;
        let listing_err = |source| FetchError::Listing {
            post: post.to_string(),
            source,
        };
        let mut listing = RawListing::from_value(&page).map_err(listing_err)?;
        let mut requested_more: BTreeSet<String> = BTreeSet::new();
        let mut requested_continue: BTreeSet<String> = BTreeSet::new();

        loop {
            let pending: Vec<String> = std::mem::take(&mut listing.more)
                .into_iter()
                .filter(|id| requested_more.insert(id.clone()))
                .collect();
            let continues: Vec<String> = std::mem::take(&mut listing.continue_from)
                .into_iter()
                .filter(|id| requested_continue.insert(id.clone()))
                .collect();
            if pending.is_empty() && continues.is_empty() {
                break;
            }
            for batch in pending.chunks(MORECHILDREN_BATCH) {
                let url = format!(
                    "{base}/api/morechildren.json?api_type=json&link_id=t3_{post}&children={}&raw_json=1",
                    batch.join(",")
                );
                let body = self.get(&url)?;
                let things = body.pointer("/json/data/things").ok_or_else(|| FetchError::BadResponse {
                    url: url.clone(),
                    detail: "missing json.data.things".into(),
                })?;
                listing.absorb_things(things).map_err(listing_err)?;
            }
            for parent in continues {
                let url = format!("{base}/comments/{post}.json?comment={parent}&limit={limit}&raw_json=1");
                let sub = RawListing::from_value(&self.get(&url)?).map_err(listing_err)?;
                listing.comments.extend(sub.comments);
                listing.more.extend(sub.more);
                listing.continue_from.extend(sub.continue_from);
            }
        }

        // Continuation pages repeat the comment they continue from.
        let mut unique = BTreeMap::new();
        for c in std::mem::take(&mut listing.comments) {
            unique.entry(c.id.clone()).or_insert(c);
        }
        listing.comments = unique.into_values().collect();
        Ok(listing)
    }
}
