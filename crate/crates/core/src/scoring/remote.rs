//! Perspective-style `comments:analyze` client.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Clock, Provider, ScoreError, Scorer, ToxicityScore};
use crate::http::{Failure, HttpRequest, RetryPolicy, Sleeper, Transport};

pub const ATTRIBUTE: &str = "TOXICITY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub api_key: String,
    pub max_in_flight: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://commentanalyzer.googleapis.com/v1alpha1/comments:analyze".into(),
            api_key: String::new(),
            max_in_flight: 4,
        }
    }
}

pub struct RemoteScorer {
    transport: Arc<dyn Transport>,
    config: RemoteConfig,
    retry: RetryPolicy,
    sleeper: Sleeper,
    clock: Clock,
}

impl RemoteScorer {
    pub fn new(
        transport: Arc<dyn Transport>,
        config: RemoteConfig,
        retry: RetryPolicy,
        sleeper: Sleeper,
        clock: Clock,
    ) -> Self {
        Self {
            transport,
            config,
            retry,
            sleeper,
            clock,
        }
    }

    pub fn request_for(&self, body: &str) -> HttpRequest {
        let payload = json!({
            "comment": {"text": body},
            "requestedAttributes": {ATTRIBUTE: {}},
            "doNotStore": true,
        });
        HttpRequest::post(format!("{}?key={}", self.config.endpoint, self.config.api_key), payload.to_string())
            .header("Content-Type", "application/json")
    }
}

/// `attributeScores.TOXICITY.summaryScore.value`
pub fn summary_value(response: &Value) -> Option<f64> {
    response
        .pointer(&format!("/attributeScores/{ATTRIBUTE}/summaryScore/value"))
        .and_then(Value::as_f64)
}

impl Scorer for RemoteScorer {
    fn provider(&self) -> Provider {
        Provider::Remote
    }

    fn score(&self, body: &str) -> Result<ToxicityScore, ScoreError> {
        if body.trim().is_empty() {
            return Err(ScoreError::EmptyBody);
        }
        let request = self.request_for(body);
        let response = self.retry.run(&self.sleeper, || match self.transport.send(&request) {
            Err(e) => Err(Failure::Transient(ScoreError::ProviderError(e.0))),
            Ok(r) if r.is_success() => Ok(r),
            Ok(r) if r.status == 429 => Err(Failure::Transient(ScoreError::QuotaExceeded)),
            Ok(r) if r.status >= 500 => Err(Failure::Transient(ScoreError::ProviderError(format!("status {}", r.status)))),
            Ok(r) => Err(Failure::Permanent(ScoreError::ProviderError(format!(
                "status {}: {}",
                r.status,
                r.body.chars().take(200).collect::<String>()
            )))),
        })?;
        let parsed: Value =
            serde_json::from_str(&response.body).map_err(|e| ScoreError::ProviderError(format!("invalid JSON: {e}")))?;
        let value = summary_value(&parsed)
            .ok_or_else(|| ScoreError::ProviderError("response lacks a TOXICITY summary score".into()))?;
        ToxicityScore::new(value, Provider::Remote, (self.clock)())
    }

    fn max_in_flight(&self) -> usize {
        self.config.max_in_flight.max(1)
    }
}
