use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingProvider, EmbeddingVector};

/// Request body: `{"model": ..., "texts": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub model: String,
    pub texts: Vec<String>,
}

/// Response body: `{"dim": n, "vectors": [[...], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    /// Declared output dimension; responses with another dim are rejected.
    pub dim: usize,
    #[serde(default)]
    pub bearer_token: Option<String>,
    #[serde(default = "default_max_batch")]
    pub max_batch: usize,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// Minimum spacing between requests to the endpoint, in milliseconds.
    #[serde(default)]
    pub min_interval_ms: u64,
}

fn default_max_batch() -> usize {
    32
}
fn default_concurrency() -> usize {
    4
}
fn default_timeout() -> u64 {
    30
}
fn default_retries() -> u32 {
    2
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, dim: usize) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            dim,
            bearer_token: None,
            max_batch: default_max_batch(),
            concurrency: default_concurrency(),
            timeout_secs: default_timeout(),
            retries: default_retries(),
            min_interval_ms: 0,
        }
    }
}

/// HTTP client for an external embedding service.
pub struct RemoteProvider {
    config: RemoteConfig,
    agent: ureq::Agent,
    next_slot: Mutex<Instant>,
}

enum Attempt {
    Retry(String),
    Fatal(EmbedError),
}

impl RemoteProvider {
    pub fn new(config: RemoteConfig) -> Result<Self, EmbedError> {
        if config.dim == 0 || config.max_batch == 0 || config.concurrency == 0 {
            return Err(EmbedError::InvalidConfig(
                "remote dim, max_batch and concurrency must be positive".into(),
            ));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(RemoteProvider { config, agent, next_slot: Mutex::new(Instant::now()) })
    }

    fn wait_for_slot(&self) {
        if self.config.min_interval_ms == 0 {
            return;
        }
        let wait = {
            let mut slot = self.next_slot.lock().expect("rate limiter poisoned");
            let now = Instant::now();
            let start = (*slot).max(now);
            *slot = start + Duration::from_millis(self.config.min_interval_ms);
            start - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }

    fn post_once(&self, texts: &[String]) -> Result<EmbedResponse, Attempt> {
        self.wait_for_slot();
        let body = EmbedRequest { model: self.config.model.clone(), texts: texts.to_vec() };
        let mut request = self.agent.post(&self.config.endpoint);
        if let Some(token) = &self.config.bearer_token {
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = request.send_json(&body).map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = response.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if status >= 400 {
            return Err(Attempt::Fatal(EmbedError::Transport(format!("HTTP {status}"))));
        }
        response
            .body_mut()
            .read_json::<EmbedResponse>()
            .map_err(|e| Attempt::Fatal(EmbedError::MalformedResponse(e.to_string())))
    }

    fn embed_chunk(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let mut attempt = 0;
        let response = loop {
            match self.post_once(texts) {
                Ok(r) => break r,
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) if attempt >= self.config.retries => {
                    return Err(EmbedError::Transport(format!("{msg} after {} attempts", attempt + 1)))
                }
                Err(Attempt::Retry(_)) => {
                    thread::sleep(Duration::from_millis(100 << attempt.min(6)));
                    attempt += 1;
                }
            }
        };
        self.check_response(texts.len(), response)
    }

    fn check_response(&self, expected: usize, response: EmbedResponse) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if response.vectors.len() != expected {
            return Err(EmbedError::MalformedResponse(format!(
                "expected {expected} vectors, got {}",
                response.vectors.len()
            )));
        }
        if response.dim != self.config.dim {
            return Err(EmbedError::DimensionMismatch(response.dim, self.config.dim));
        }
        response
            .vectors
            .iter()
            .map(|v| {
                if v.len() != self.config.dim {
                    return Err(EmbedError::DimensionMismatch(v.len(), self.config.dim));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(EmbedError::MalformedResponse("non-finite component".into()));
                }
                Ok(EmbeddingVector::normalized(v))
            })
            .collect()
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn dim(&self) -> usize {
        self.config.dim
    }

    /// Splits `texts` into batches of at most `max_batch` and sends up to
    /// `concurrency` of them at once. Results are reassembled in input order.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let chunks: Vec<&[String]> = texts.chunks(self.config.max_batch).collect();
        type Slot = Mutex<Option<Result<Vec<EmbeddingVector>, EmbedError>>>;
        let results: Vec<Slot> = chunks.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.config.concurrency.min(chunks.len());
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(chunk) = chunks.get(i) else { break };
                    let out = self.embed_chunk(chunk);
                    let failed = out.is_err();
                    *results[i].lock().expect("result slot poisoned") = Some(out);
                    if failed {
                        // stop handing out further batches
                        next.store(chunks.len(), Ordering::SeqCst);
                    }
                });
            }
        });
        let mut out = Vec::with_capacity(texts.len());
        for slot in results {
            match slot.into_inner().expect("result slot poisoned") {
                Some(Ok(vectors)) => out.extend(vectors),
                Some(Err(e)) => return Err(e),
                None => return Err(EmbedError::Transport("batch abandoned after an earlier failure".into())),
            }
        }
        Ok(out)
    }
}
