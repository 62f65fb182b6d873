//! Blocking HTTP bindings for external embedding, NLI and generation
//! services.
//!
//! Wire protocol (JSON over POST):
//!
//! | endpoint       | request                                              | response                              |
//! |----------------|------------------------------------------------------|---------------------------------------|
//! | `/v1/embed`    | `{"model", "texts": [..]}`                           | `{"vectors": [[..], ..]}`             |
//! | `/v1/nli`      | `{"model", "pairs": [{"premise", "hypothesis"}]}`    | `{"scores": [..]}`                    |
//! | `/v1/generate` | `{"scene_id", "context", "template", "k"}`           | `{"candidates": [{"q", "a"}, ..]}`    |
//!
//! Embedding and NLI inputs are split into batches of at most `batch_size`;
//! at most `max_in_flight` batches are outstanding at once. Each request is
//! retried on timeouts, connection failures, 429 and 5xx responses with
//! exponential backoff.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    BackendError, EmbeddingBackend, Generated, GenerationRequest, GeneratorBackend, NliBackend,
    QaCandidate,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub base_ms: u64,
    pub factor: f64,
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            base_ms: 250,
            factor: 2.0,
            max_attempts: 3,
        }
    }
}

impl RetryPolicy {
    /// Wait after the `attempt`-th failure (1-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        let ms = self.base_ms as f64 * self.factor.powi(attempt.saturating_sub(1) as i32);
        Duration::from_millis(ms.round() as u64)
    }
}

fn default_batch_size() -> usize {
    32
}
fn default_timeout_ms() -> u64 {
    30_000
}
fn default_in_flight() -> usize {
    8
}
fn default_max_candidates() -> usize {
    16
}

/// One HTTP model endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub url: String,
    pub model: String,
    pub version: String,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bearer_token: Option<String>,
    /// Expected embedding dimension (embedding endpoints only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default = "default_max_candidates")]
    pub max_candidates: usize,
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>, model: impl Into<String>, version: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            model: model.into(),
            version: version.into(),
            batch_size: default_batch_size(),
            timeout_ms: default_timeout_ms(),
            max_in_flight: default_in_flight(),
            retry: RetryPolicy::default(),
            bearer_token: None,
            dimension: None,
            max_candidates: default_max_candidates(),
        }
    }
}

/// Request counters shared by a client and its callers.
#[derive(Debug, Default)]
pub struct HttpStats {
    /// Logical requests (one per batch or generation call).
    pub requests: AtomicUsize,
    /// HTTP attempts including retries.
    pub attempts: AtomicUsize,
    /// Generation candidates dropped by validation.
    pub dropped: AtomicUsize,
    in_flight: AtomicUsize,
    /// Highest number of simultaneously outstanding requests observed.
    pub peak_in_flight: AtomicUsize,
}

impl HttpStats {
    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
    pub fn attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }
    pub fn dropped(&self) -> usize {
        self.dropped.load(Ordering::SeqCst)
    }
    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }
}

struct Transport {
    cfg: EndpointConfig,
    client: reqwest::blocking::Client,
    stats: Arc<HttpStats>,
}

enum Failure {
    Retryable(String),
    Fatal(BackendError),
}

impl Transport {
    fn new(cfg: EndpointConfig) -> Result<Self, BackendError> {
        if cfg.batch_size == 0 || cfg.max_in_flight == 0 {
            return Err(BackendError::Protocol(
                "batch_size and max_in_flight must be positive".into(),
            ));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        Ok(Self {
            cfg,
            client,
            stats: Arc::new(HttpStats::default()),
        })
    }

    fn endpoint(&self, path: &str) -> String {
        format!("{}{}", self.cfg.url.trim_end_matches('/'), path)
    }

    fn attempt(&self, url: &str, body: &Value) -> Result<Value, Failure> {
        let mut req = self.client.post(url).json(body);
        if let Some(token) = &self.cfg.bearer_token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Failure::Retryable(format!("status {status}")));
        }
        if !status.is_success() {
            return Err(Failure::Fatal(BackendError::Protocol(format!(
                "status {status} from {url}"
            ))));
        }
        let bytes = resp.bytes().map_err(|e| Failure::Retryable(e.to_string()))?;
        serde_json::from_slice(&bytes).map_err(|e| {
            Failure::Fatal(BackendError::Protocol(format!("invalid JSON body: {e}")))
        })
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, BackendError> {
        let url = self.endpoint(path);
        let policy = &self.cfg.retry;
        let max = policy.max_attempts.max(1);
        self.stats.requests.fetch_add(1, Ordering::SeqCst);
        let now = self.stats.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.stats.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        let result = (|| {
            let mut last = String::new();
            for attempt in 1..=max {
                self.stats.attempts.fetch_add(1, Ordering::SeqCst);
                match self.attempt(&url, body) {
                    Ok(v) => {
                        if attempt > 1 {
                            log::info!("{url}: succeeded on attempt {attempt}/{max}");
                        }
                        return Ok(v);
                    }
                    Err(Failure::Fatal(e)) => return Err(e),
                    Err(Failure::Retryable(msg)) => {
                        log::warn!("{url}: attempt {attempt}/{max} failed: {msg}");
                        last = msg;
                        if attempt < max {
                            thread::sleep(policy.delay(attempt));
                        }
                    }
                }
            }
            Err(BackendError::Unavailable(format!(
                "{url}: {max} attempts failed, last error: {last}"
            )))
        })();
        self.stats.in_flight.fetch_sub(1, Ordering::SeqCst);
        result
    }

    /// Runs `call` over `batch_size` chunks of `items` with at most
    /// `max_in_flight` concurrent calls; output stays index-aligned.
    fn batched<I: Sync, T: Send>(
        &self,
        items: &[I],
        call: impl Fn(&[I]) -> Result<Vec<T>, BackendError> + Sync,
    ) -> Result<Vec<T>, BackendError> {
        let chunks: Vec<&[I]> = items.chunks(self.cfg.batch_size).collect();
        type Slot<T> = Mutex<Option<Result<Vec<T>, BackendError>>>;
        let slots: Vec<Slot<T>> =
            chunks.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.cfg.max_in_flight.min(chunks.len());
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= chunks.len() {
                        break;
                    }
                    let r = call(chunks[i]);
                    let failed = r.is_err();
                    *slots[i].lock().unwrap() = Some(r);
                    if failed {
                        // stop handing out new batches
                        next.store(chunks.len(), Ordering::SeqCst);
                    }
                });
            }
        });
        let mut out = Vec::with_capacity(items.len());
        for slot in slots {
            match slot.into_inner().unwrap() {
                Some(Ok(v)) => out.extend(v),
                Some(Err(e)) => return Err(e),
                None => {}
            }
        }
        Ok(out)
    }
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value, BackendError> {
    v.get(key)
        .ok_or_else(|| BackendError::Protocol(format!("response missing `{key}`")))
}

/// Embedding client for `/v1/embed`.
pub struct HttpEmbedder {
    transport: Transport,
    dimension: usize,
}

impl HttpEmbedder {
    pub fn new(cfg: EndpointConfig) -> Result<Self, BackendError> {
        let dimension = cfg.dimension.ok_or_else(|| {
            BackendError::Protocol("embedding endpoint config needs `dimension`".into())
        })?;
        Ok(Self {
            transport: Transport::new(cfg)?,
            dimension,
        })
    }

    pub fn stats(&self) -> Arc<HttpStats> {
        self.transport.stats.clone()
    }

    fn embed_chunk(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        let body = json!({ "model": self.transport.cfg.model, "texts": texts });
        let resp = self.transport.post("/v1/embed", &body)?;
        let vectors: Vec<Vec<f64>> = serde_json::from_value(field(&resp, "vectors")?.clone())
            .map_err(|e| BackendError::Protocol(format!("bad `vectors`: {e}")))?;
        if vectors.len() != texts.len() {
            return Err(BackendError::Protocol(format!(
                "expected {} vectors, got {}",
                texts.len(),
                vectors.len()
            )));
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != self.dimension) {
            return Err(BackendError::Protocol(format!(
                "expected dimension {}, got {}",
                self.dimension,
                v.len()
            )));
        }
        Ok(vectors)
    }
}

impl EmbeddingBackend for HttpEmbedder {
    fn name(&self) -> &str {
        &self.transport.cfg.model
    }

    fn version(&self) -> &str {
        &self.transport.cfg.version
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        self.transport.batched(texts, |chunk| self.embed_chunk(chunk))
    }
}

/// Entailment client for `/v1/nli`.
pub struct HttpNli {
    transport: Transport,
}

impl HttpNli {
    pub fn new(cfg: EndpointConfig) -> Result<Self, BackendError> {
        Ok(Self {
            transport: Transport::new(cfg)?,
        })
    }

    pub fn stats(&self) -> Arc<HttpStats> {
        self.transport.stats.clone()
    }

    fn score_chunk(&self, pairs: &[(String, String)]) -> Result<Vec<f64>, BackendError> {
        let pairs_json: Vec<Value> = pairs
            .iter()
            .map(|(p, h)| json!({ "premise": p, "hypothesis": h }))
            .collect();
        let body = json!({ "model": self.transport.cfg.model, "pairs": pairs_json });
        let resp = self.transport.post("/v1/nli", &body)?;
        let scores: Vec<f64> = serde_json::from_value(field(&resp, "scores")?.clone())
            .map_err(|e| BackendError::Protocol(format!("bad `scores`: {e}")))?;
        if scores.len() != pairs.len() {
            return Err(BackendError::Protocol(format!(
                "expected {} scores, got {}",
                pairs.len(),
                scores.len()
            )));
        }
        if scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(BackendError::Protocol("score outside [0, 1]".into()));
        }
        Ok(scores)
    }
}

impl NliBackend for HttpNli {
    fn name(&self) -> &str {
        &self.transport.cfg.model
    }

    fn version(&self) -> &str {
        &self.transport.cfg.version
    }

    fn entailment_batch(&self, pairs: &[(String, String)]) -> Result<Vec<f64>, BackendError> {
        self.transport.batched(pairs, |chunk| self.score_chunk(chunk))
    }
}

/// Generation client for `/v1/generate`.
pub struct HttpGenerator {
    transport: Transport,
}

impl HttpGenerator {
    pub fn new(cfg: EndpointConfig) -> Result<Self, BackendError> {
        Ok(Self {
            transport: Transport::new(cfg)?,
        })
    }

    pub fn stats(&self) -> Arc<HttpStats> {
        self.transport.stats.clone()
    }
}

impl GeneratorBackend for HttpGenerator {
    fn name(&self) -> &str {
        &self.transport.cfg.model
    }

    fn version(&self) -> &str {
        &self.transport.cfg.version
    }

    fn max_candidates(&self) -> usize {
        self.transport.cfg.max_candidates
    }

    fn generate(&self, request: &GenerationRequest) -> Result<Generated, BackendError> {
        let body = serde_json::to_value(request)
            .map_err(|e| BackendError::Protocol(e.to_string()))?;
        let resp = self.transport.post("/v1/generate", &body)?;
        let raw = field(&resp, "candidates")?
            .as_array()
            .ok_or_else(|| BackendError::Protocol("`candidates` is not an array".into()))?;
        let mut out = Generated::default();
        for item in raw {
            match serde_json::from_value::<QaCandidate>(item.clone()) {
                Ok(c) if c.is_well_formed() => out.candidates.push(c),
                _ => out.dropped += 1,
            }
        }
        let cap = self.max_candidates();
        if out.candidates.len() > cap {
            log::warn!(
                "generator returned {} candidates, keeping {cap}",
                out.candidates.len()
            );
            out.candidates.truncate(cap);
        }
        self.transport
            .stats
            .dropped
            .fetch_add(out.dropped, Ordering::SeqCst);
        Ok(out)
    }
}

/// Embeds `texts` through an endpoint described by `cfg`.
pub fn http_embed(texts: &[String], cfg: &EndpointConfig) -> Result<Vec<Vec<f64>>, BackendError> {
    HttpEmbedder::new(cfg.clone())?.embed_batch(texts)
}

/// Issues one generation request through an endpoint described by `cfg`.
pub fn http_generate(
    request: &GenerationRequest,
    cfg: &EndpointConfig,
) -> Result<Generated, BackendError> {
    HttpGenerator::new(cfg.clone())?.generate(request)
}
