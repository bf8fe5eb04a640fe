//! Blocking HTTP plumbing shared by the listing fetcher and the remote scorer.
//!
//! Provider clients talk to a [`Transport`] rather than to `reqwest`
//! directly so that recorded sessions can be replayed in tests with
//! [`ReplayTransport`].

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpRequest {
    pub method: Method,
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Option<String>,
}

impl HttpRequest {
    pub fn get(url: impl Into<String>) -> Self {
        Self {
            method: Method::Get,
            url: url.into(),
            headers: Vec::new(),
            body: None,
        }
    }

    pub fn post(url: impl Into<String>, body: impl Into<String>) -> Self {
        Self {
            method: Method::Post,
            url: url.into(),
            headers: Vec::new(),
            body: Some(body.into()),
        }
    }

    pub fn header(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.headers.push((name.into(), value.into()));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpResponse {
    pub status: u16,
    /// Lowercased header names.
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    pub body: String,
}

impl HttpResponse {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(&name.to_ascii_lowercase()).map(String::as_str)
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("transport error: {0}")]
pub struct TransportError(pub String);

pub trait Transport: Send + Sync {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError>;
}

/// Live transport backed by `reqwest`'s blocking client.
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError(e.to_string()))?;
        Ok(Self { client })
    }
}

impl Transport for ReqwestTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let mut builder = match request.method {
            Method::Get => self.client.get(&request.url),
            Method::Post => self.client.post(&request.url),
        };
        for (name, value) in &request.headers {
            builder = builder.header(name, value);
        }
        if let Some(body) = &request.body {
            builder = builder.body(body.clone());
        }
        let response = builder.send().map_err(|e| TransportError(e.to_string()))?;
        let status = response.status().as_u16();
        let headers = response
            .headers()
            .iter()
            .filter_map(|(k, v)| Some((k.as_str().to_ascii_lowercase(), v.to_str().ok()?.to_string())))
            .collect();
        let body = response.text().map_err(|e| TransportError(e.to_string()))?;
        Ok(HttpResponse {
            status,
            headers,
            body,
        })
    }
}

/// One recorded request/response pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub method: Method,
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_body: Option<String>,
    pub response: HttpResponse,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub interactions: Vec<Interaction>,
}

impl Session {
    pub fn load(path: &Path) -> Result<Self, TransportError> {
        let text = fs::read_to_string(path).map_err(|e| TransportError(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| TransportError(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), TransportError> {
        let text = serde_json::to_string_pretty(self).expect("session serializes");
        fs::write(path, text).map_err(|e| TransportError(format!("{}: {e}", path.display())))
    }
}

/// Serves recorded responses keyed by method and URL.
///
/// Repeated requests for the same key consume recorded responses in order;
/// a request with nothing left to replay is a transport error.
pub struct ReplayTransport {
    queues: Mutex<BTreeMap<(Method, String), VecDeque<HttpResponse>>>,
    log: Mutex<Vec<HttpRequest>>,
}

impl ReplayTransport {
    pub fn new(session: Session) -> Self {
        let mut queues: BTreeMap<(Method, String), VecDeque<HttpResponse>> = BTreeMap::new();
        for i in session.interactions {
            queues.entry((i.method, i.url)).or_default().push_back(i.response);
        }
        Self {
            queues: Mutex::new(queues),
            log: Mutex::new(Vec::new()),
        }
    }

    /// Requests received so far, in order.
    pub fn requests(&self) -> Vec<HttpRequest> {
        self.log.lock().expect("replay log").clone()
    }
}

impl Transport for ReplayTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        self.log.lock().expect("replay log").push(request.clone());
        let mut queues = self.queues.lock().expect("replay queues");
        queues
            .get_mut(&(request.method, request.url.clone()))
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| TransportError(format!("no recorded response for {:?} {}", request.method, request.url)))
    }
}

/// Wraps another transport and keeps every exchange for later replay.
pub struct RecordingTransport<T> {
    inner: T,
    session: Mutex<Session>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        Self {
            inner,
            session: Mutex::new(Session::default()),
        }
    }

    pub fn session(&self) -> Session {
        self.session.lock().expect("recording").clone()
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let response = self.inner.send(request)?;
        self.session.lock().expect("recording").interactions.push(Interaction {
            method: request.method,
            url: request.url.clone(),
            request_body: request.body.clone(),
            response: response.clone(),
        });
        Ok(response)
    }
}

pub type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

pub fn thread_sleeper() -> Sleeper {
    Arc::new(std::thread::sleep)
}

/// Bounded exponential backoff: `attempts` tries in total, sleeping
/// `base_delay * factor^(k-1)` after the k-th failure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
    pub factor: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_secs(1),
            factor: 2,
        }
    }
}

/// How a failed attempt should be treated.
#[derive(Debug)]
pub enum Failure<E> {
    Transient(E),
    Permanent(E),
}

impl RetryPolicy {
    pub fn delay_after(&self, failures: u32) -> Duration {
        self.base_delay * self.factor.saturating_pow(failures.saturating_sub(1))
    }

    pub fn run<T, E>(&self, sleep: &Sleeper, mut op: impl FnMut() -> Result<T, Failure<E>>) -> Result<T, E> {
        let mut failures = 0;
        loop {
            match op() {
                Ok(v) => return Ok(v),
                Err(Failure::Permanent(e)) => return Err(e),
                Err(Failure::Transient(e)) => {
                    failures += 1;
                    if failures >= self.attempts.max(1) {
                        return Err(e);
                    }
                    let delay = self.delay_after(failures);
                    tracing::debug!(failures, ?delay, "retrying after transient failure");
                    sleep(delay);
                }
            }
        }
    }
}
