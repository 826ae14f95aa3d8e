//! Chat-completion backends that expose first-token log-probabilities,
//! wrapped by [`LlmClient`] which adds caching, retries and a bounded
//! worker pool.

mod cache;
mod http;
mod mock;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use cache::{parse_cache_line, CacheEntry, ResponseCache};
pub use http::{parse_chat_response, HttpBackend};
pub use mock::{mock_response, MockBackend};

pub const ENV_URL: &str = "HJD_BACKEND_URL";
pub const ENV_KEY: &str = "HJD_BACKEND_KEY";
pub const ENV_KIND: &str = "HJD_BACKEND_KIND";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model_name: String,
    pub messages: Vec<ChatMessage>,
    pub max_tokens: u32,
    pub want_logprobs: bool,
    pub top_logprobs_k: u32,
    /// Temperature-zero decoding.
    pub greedy: bool,
}

impl CompletionRequest {
    /// Greedy single-token request asking for first-token log-probabilities.
    pub fn scoring(model_name: &str, messages: Vec<ChatMessage>, top_k: u32) -> Self {
        CompletionRequest {
            model_name: model_name.to_string(),
            messages,
            max_tokens: 1,
            want_logprobs: true,
            top_logprobs_k: top_k,
            greedy: true,
        }
    }

    pub fn generation(model_name: &str, messages: Vec<ChatMessage>, max_tokens: u32) -> Self {
        CompletionRequest {
            model_name: model_name.to_string(),
            messages,
            max_tokens,
            want_logprobs: false,
            top_logprobs_k: 0,
            greedy: true,
        }
    }

    fn validate(&self) -> Result<(), BackendError> {
        if self.messages.is_empty() {
            return Err(BackendError::InvalidRequest("messages must be nonempty".into()));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogprob {
    pub token: String,
    pub logprob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendResponse {
    pub text: String,
    pub first_token_logprobs: Vec<TokenLogprob>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("transport error: {message}")]
    Transport { message: String, transient: bool },
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("cache: {0}")]
    Cache(String),
}

impl BackendError {
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Transport { transient: true, .. })
    }
}

pub trait Backend: Send + Sync {
    /// Stable identifier that takes part in the cache key.
    fn id(&self) -> String;
    fn complete(&self, request: &CompletionRequest) -> Result<BackendResponse, BackendError>;
}

/// Content hash of everything that determines a response.
pub fn request_digest(backend_id: &str, request: &CompletionRequest) -> String {
    #[derive(Serialize)]
    struct Key<'a> {
        backend: &'a str,
        request: &'a CompletionRequest,
    }
    let bytes = serde_json::to_vec(&Key {
        backend: backend_id,
        request,
    })
    .expect("request serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 4,
            base_delay: Duration::from_millis(250),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy {
            max_attempts: 1,
            ..Default::default()
        }
    }

    /// Delay before retry number `attempt` (1-based), doubling each time.
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

fn check_response(request: &CompletionRequest, response: &BackendResponse) -> Result<(), BackendError> {
    if !request.want_logprobs {
        return Ok(());
    }
    if response.first_token_logprobs.is_empty() {
        return Err(BackendError::MalformedResponse(
            "log-probabilities were requested but none returned".into(),
        ));
    }
    for t in &response.first_token_logprobs {
        if t.logprob.is_nan() || t.logprob > 0.0 {
            return Err(BackendError::MalformedResponse(format!(
                "token {:?} has invalid log-probability {}",
                t.token, t.logprob
            )));
        }
    }
    Ok(())
}

/// Counters observed by tests and run summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClientStats {
    pub backend_calls: u64,
    pub cache_hits: u64,
}

pub struct LlmClient {
    backend: Arc<dyn Backend>,
    backend_id: String,
    cache: Option<ResponseCache>,
    retry: RetryPolicy,
    pool: rayon::ThreadPool,
    concurrency: usize,
    backend_calls: AtomicU64,
    cache_hits: AtomicU64,
}

impl LlmClient {
    pub fn new(backend: Arc<dyn Backend>, cache: Option<ResponseCache>) -> Self {
        Self::with_options(backend, cache, RetryPolicy::default(), 4)
    }

    pub fn with_options(
        backend: Arc<dyn Backend>,
        cache: Option<ResponseCache>,
        retry: RetryPolicy,
        concurrency: usize,
    ) -> Self {
        let concurrency = concurrency.max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(concurrency)
            .thread_name(|i| format!("llm-client-{i}"))
            .build()
            .expect("thread pool");
        LlmClient {
            backend_id: backend.id(),
            backend,
            cache,
            retry,
            pool,
            concurrency,
            backend_calls: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
        }
    }

    pub fn backend_id(&self) -> &str {
        &self.backend_id
    }

    pub fn concurrency(&self) -> usize {
        self.concurrency
    }

    pub fn stats(&self) -> ClientStats {
        ClientStats {
            backend_calls: self.backend_calls.load(Ordering::SeqCst),
            cache_hits: self.cache_hits.load(Ordering::SeqCst),
        }
    }

    /// Serves from cache when possible; otherwise calls the backend with
    /// exponential backoff on transient failures and caches the success.
    pub fn complete(&self, request: &CompletionRequest) -> Result<BackendResponse, BackendError> {
        request.validate()?;
        let digest = self.cache.as_ref().map(|_| request_digest(&self.backend_id, request));
        if let (Some(cache), Some(digest)) = (&self.cache, &digest) {
            if let Some(hit) = cache.get(digest) {
                self.cache_hits.fetch_add(1, Ordering::SeqCst);
                return Ok(hit);
            }
        }
        let mut attempt = 1;
        let response = loop {
            self.backend_calls.fetch_add(1, Ordering::SeqCst);
            match self.backend.complete(request) {
                Ok(r) => break r,
                Err(e) if e.is_transient() && attempt < self.retry.max_attempts => {
                    let delay = self.retry.delay(attempt);
                    log::warn!("attempt {attempt} failed ({e}); retrying in {delay:?}");
                    thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        };
        check_response(request, &response)?;
        if let (Some(cache), Some(digest)) = (&self.cache, &digest) {
            cache.insert(digest, &response)?;
        }
        Ok(response)
    }

    /// Runs requests on the client's worker pool (at most `concurrency` in
    /// flight). Results come back in input order.
    pub fn complete_many(&self, requests: &[CompletionRequest]) -> Vec<Result<BackendResponse, BackendError>> {
        self.pool
            .install(|| requests.par_iter().map(|r| self.complete(r)).collect())
    }

    /// Maps `f` over `items` on the worker pool, preserving order.
    pub fn run_parallel<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
        self.pool.install(|| items.par_iter().map(f).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Mock,
}

impl std::str::FromStr for BackendKind {
    type Err = BackendError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "http" => Ok(BackendKind::Http),
            "mock" => Ok(BackendKind::Mock),
            other => Err(BackendError::Config(format!(
                "unknown backend kind {other:?} (expected http or mock)"
            ))),
        }
    }
}

/// Backend selection; missing values fall back to the `HJD_BACKEND_*`
/// environment variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendSettings {
    pub kind: BackendKind,
    pub url: Option<String>,
    pub key: Option<String>,
    pub seed: u64,
}

impl BackendSettings {
    pub fn from_env(kind: Option<BackendKind>, seed: u64) -> Result<Self, BackendError> {
        let kind = match kind {
            Some(k) => k,
            None => match std::env::var(ENV_KIND) {
                Ok(v) => v.parse()?,
                Err(_) => BackendKind::Mock,
            },
        };
        Ok(BackendSettings {
            kind,
            url: std::env::var(ENV_URL).ok().filter(|s| !s.is_empty()),
            key: std::env::var(ENV_KEY).ok().filter(|s| !s.is_empty()),
            seed,
        })
    }

    pub fn build(&self) -> Result<Arc<dyn Backend>, BackendError> {
        match self.kind {
            BackendKind::Mock => Ok(Arc::new(MockBackend::new(self.seed))),
            BackendKind::Http => {
                let url = self
                    .url
                    .clone()
                    .ok_or_else(|| BackendError::Config(format!("{ENV_URL} must be set for the http backend")))?;
                Ok(Arc::new(HttpBackend::new(url, self.key.clone())))
            }
        }
    }
}
