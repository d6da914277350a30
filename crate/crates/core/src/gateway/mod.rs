//! Uniform access to chat, vision-chat and embedding models with caching,
//! retries and concurrency limits.

mod cache;
mod limiter;
mod mock;
#[cfg(feature = "remote")]
mod openai;
mod similarity;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{CacheEntry, CacheKey, CacheMeta, ResponseCache};
pub use limiter::{Limiter, Permit};
pub use mock::{MockBackend, MockFixture, MockRule, ScriptedFailure};
#[cfg(feature = "remote")]
pub use openai::OpenAiBackend;
pub use similarity::{cosine_similarity, l2_norm, l2_normalize, VectorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    Chat,
    VisionChat,
    Embedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

/// An image attached to a message. Only its digest takes part in equality
/// and cache keys; the bytes travel alongside.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImageInput {
    pub mime: String,
    pub sha256: String,
    #[serde(skip)]
    pub data: Arc<[u8]>,
}

impl ImageInput {
    pub fn new(mime: impl Into<String>, data: Vec<u8>) -> Self {
        Self {
            mime: mime.into(),
            sha256: hex::encode(Sha256::digest(&data)),
            data: data.into(),
        }
    }
}

impl PartialEq for ImageInput {
    fn eq(&self, other: &Self) -> bool {
        self.mime == other.mime && self.sha256 == other.sha256
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub images: Vec<ImageInput>,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self::text(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::text(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::text(Role::Assistant, content)
    }

    fn text(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
            images: Vec::new(),
        }
    }

    pub fn with_image(mut self, image: ImageInput) -> Self {
        self.images.push(image);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_max_tokens() -> u32 {
    1024
}

impl Default for Params {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub kind: RequestKind,
    pub model_id: String,
    pub messages: Vec<ChatMessage>,
    pub params: Params,
}

impl ModelRequest {
    pub fn cache_key(&self) -> CacheKey {
        CacheKey::digest(&json!({
            "kind": self.kind,
            "model_id": self.model_id,
            "payload": self.messages,
            "params": self.params,
        }))
    }

    /// All message text joined, with attached images as `image:<sha256>` lines.
    pub fn prompt_text(&self) -> String {
        let mut out = String::new();
        for (i, m) in self.messages.iter().enumerate() {
            if i > 0 {
                out.push_str("\n\n");
            }
            out.push_str(&m.content);
            for image in &m.images {
                out.push_str("\nimage:");
                out.push_str(&image.sha256);
            }
        }
        out
    }
}

fn embedding_key(model_id: &str, text: &str) -> CacheKey {
    CacheKey::digest(&json!({
        "kind": RequestKind::Embedding,
        "model_id": model_id,
        "payload": text,
    }))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("rate limited (HTTP 429)")]
    RateLimited,
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl BackendError {
    fn retryable(&self) -> bool {
        match self {
            BackendError::Transport(_) | BackendError::RateLimited => true,
            BackendError::Status { status, .. } => *status >= 500,
            BackendError::Malformed(_) | BackendError::Config(_) => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("transport error after {attempts} attempt(s): {source}")]
    Transport {
        attempts: u32,
        #[source]
        source: BackendError,
    },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("cache I/O: {0}")]
    Cache(#[from] std::io::Error),
}

/// A model provider speaking one wire protocol.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn chat(&self, request: &ModelRequest) -> Result<String, BackendError>;
    fn embed(&self, model_id: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            base_delay: Duration::ZERO,
        }
    }

    fn run<T>(&self, mut call: impl FnMut() -> Result<T, BackendError>) -> Result<T, GatewayError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match call() {
                Ok(v) => return Ok(v),
                Err(BackendError::Config(msg)) => return Err(GatewayError::Config(msg)),
                Err(BackendError::Status { status, body }) if status != 429 && status < 500 => {
                    return Err(GatewayError::Config(format!("HTTP {status}: {body}")))
                }
                Err(e) if e.retryable() && attempt < self.max_attempts => {
                    let delay = self.base_delay * 2u32.saturating_pow(attempt - 1);
                    log::debug!("attempt {attempt} failed ({e}), retrying in {delay:?}");
                    if !delay.is_zero() {
                        std::thread::sleep(delay);
                    }
                }
                Err(e) => {
                    return Err(GatewayError::Transport {
                        attempts: attempt,
                        source: e,
                    })
                }
            }
        }
    }
}

/// Where requests for one model role go.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub model_id: Option<String>,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub mock: Option<PathBuf>,
    #[serde(default)]
    pub timeout_s: Option<u64>,
}

impl BackendConfig {
    pub fn build(&self) -> Result<Arc<dyn Backend>, GatewayError> {
        match (&self.mock, &self.base_url) {
            (Some(path), _) => Ok(Arc::new(MockBackend::from_path(path)?)),
            (None, Some(_base)) => {
                #[cfg(feature = "remote")]
                {
                    Ok(Arc::new(OpenAiBackend::from_config(self)?))
                }
                #[cfg(not(feature = "remote"))]
                {
                    Err(GatewayError::Config(format!(
                        "remote backend {_base} requested but built without the `remote` feature"
                    )))
                }
            }
            (None, None) => Err(GatewayError::Config(
                "backend has neither a base_url nor a mock fixture".into(),
            )),
        }
    }
}

/// A model endpoint bound to one model id, sharing cache and limiter with
/// other roles when built from the same parts.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn Backend>,
    model_id: String,
    params: Params,
    cache: Option<Arc<ResponseCache>>,
    limiter: Arc<Limiter>,
    retry: RetryPolicy,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("backend", &self.backend.name())
            .field("model_id", &self.model_id)
            .finish()
    }
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>, model_id: impl Into<String>) -> Self {
        Self {
            backend,
            model_id: model_id.into(),
            params: Params::default(),
            cache: None,
            limiter: Arc::new(Limiter::default()),
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_cache(mut self, cache: Arc<ResponseCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_limiter(mut self, limiter: Arc<Limiter>) -> Self {
        self.limiter = limiter;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_params(mut self, params: Params) -> Self {
        self.params = params;
        self
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn request(&self, messages: Vec<ChatMessage>) -> ModelRequest {
        let kind = if messages.iter().any(|m| !m.images.is_empty()) {
            RequestKind::VisionChat
        } else {
            RequestKind::Chat
        };
        ModelRequest {
            kind,
            model_id: self.model_id.clone(),
            messages,
            params: self.params.clone(),
        }
    }

    pub fn chat(&self, messages: Vec<ChatMessage>) -> Result<String, GatewayError> {
        self.complete(&self.request(messages))
    }

    pub fn complete(&self, request: &ModelRequest) -> Result<String, GatewayError> {
        if request.kind == RequestKind::Embedding {
            return Err(GatewayError::Input(
                "use embed() for embedding requests".into(),
            ));
        }
        let key = request.cache_key();
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            return Ok(hit.value);
        }
        let response = {
            let _permit = self.limiter.acquire();
            self.retry.run(|| self.backend.chat(request))?
        };
        if let Some(cache) = &self.cache {
            cache.put(
                &key,
                request.kind,
                &request.model_id,
                self.backend.name(),
                &response,
            )?;
        }
        Ok(response)
    }

    /// Unit-norm vectors, one per text, in input order.
    pub fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::Input(
                "embed() needs at least one text".into(),
            ));
        }
        let mut out: Vec<Option<Vec<f64>>> = vec![None; texts.len()];
        let mut missing = Vec::new();
        for (i, text) in texts.iter().enumerate() {
            let hit = self
                .cache
                .as_ref()
                .and_then(|c| c.get(&embedding_key(&self.model_id, text)))
                .and_then(|e| serde_json::from_str::<Vec<f64>>(&e.value).ok());
            match hit {
                Some(v) => out[i] = Some(v),
                None => missing.push(i),
            }
        }
        if !missing.is_empty() {
            let batch: Vec<String> = missing.iter().map(|&i| texts[i].clone()).collect();
            let vectors = {
                let _permit = self.limiter.acquire();
                self.retry
                    .run(|| self.backend.embed(&self.model_id, &batch))?
            };
            if vectors.len() != batch.len() {
                return Err(GatewayError::Transport {
                    attempts: 1,
                    source: BackendError::Malformed(format!(
                        "expected {} embeddings, got {}",
                        batch.len(),
                        vectors.len()
                    )),
                });
            }
            for (&i, raw) in missing.iter().zip(vectors) {
                let unit = l2_normalize(&raw).map_err(|e| GatewayError::Transport {
                    attempts: 1,
                    source: BackendError::Malformed(e.to_string()),
                })?;
                if let Some(cache) = &self.cache {
                    let body = serde_json::to_string(&unit).expect("vector serializes");
                    cache.put(
                        &embedding_key(&self.model_id, &texts[i]),
                        RequestKind::Embedding,
                        &self.model_id,
                        self.backend.name(),
                        &body,
                    )?;
                }
                out[i] = Some(unit);
            }
        }
        Ok(out
            .into_iter()
            .map(|v| v.expect("every slot filled"))
            .collect())
    }
}
