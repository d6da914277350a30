//! OpenAI-compatible HTTP backend (`/v1/chat/completions`, `/v1/embeddings`).

use std::time::Duration;

use base64::Engine;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{Backend, BackendConfig, BackendError, ChatMessage, GatewayError, ModelRequest};

pub struct OpenAiBackend {
    base_url: String,
    api_key: Option<String>,
    http: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    #[serde(default)]
    index: usize,
    embedding: Vec<f64>,
}

impl OpenAiBackend {
    pub fn new(
        base_url: &str,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Result<Self, GatewayError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Config(format!("http client: {e}")))?;
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            http,
        })
    }

    /// Reads the bearer token from the configured environment variable.
    pub fn from_config(config: &BackendConfig) -> Result<Self, GatewayError> {
        let base_url = config
            .base_url
            .as_deref()
            .ok_or_else(|| GatewayError::Config("missing base_url".into()))?;
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                GatewayError::Config(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        Self::new(
            base_url,
            api_key,
            Duration::from_secs(config.timeout_s.unwrap_or(120)),
        )
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, BackendError> {
        let mut req = self
            .http
            .post(format!("{}{path}", self.base_url))
            .json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .text()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        match status {
            200..=299 => {
                serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))
            }
            429 => Err(BackendError::RateLimited),
            _ => Err(BackendError::Status { status, body: text }),
        }
    }
}

fn wire_message(message: &ChatMessage) -> Value {
    if message.images.is_empty() {
        return json!({ "role": message.role, "content": message.content });
    }
    let mut parts = vec![json!({ "type": "text", "text": message.content })];
    for image in &message.images {
        let b64 = base64::engine::general_purpose::STANDARD.encode(&image.data);
        parts.push(json!({
            "type": "image_url",
            "image_url": { "url": format!("data:{};base64,{b64}", image.mime) },
        }));
    }
    json!({ "role": message.role, "content": parts })
}

pub(crate) fn chat_body(request: &ModelRequest) -> Value {
    let mut body = json!({
        "model": request.model_id,
        "messages": request.messages.iter().map(wire_message).collect::<Vec<_>>(),
        "temperature": request.params.temperature,
        "max_tokens": request.params.max_tokens,
    });
    if let Some(seed) = request.params.seed {
        body["seed"] = json!(seed);
    }
    body
}

impl Backend for OpenAiBackend {
    fn name(&self) -> &str {
        "openai-compatible"
    }

    fn chat(&self, request: &ModelRequest) -> Result<String, BackendError> {
        let value = self.post("/v1/chat/completions", &chat_body(request))?;
        let parsed: ChatResponse =
            serde_json::from_value(value).map_err(|e| BackendError::Malformed(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Malformed("response has no message content".into()))
    }

    fn embed(&self, model_id: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        let value = self.post(
            "/v1/embeddings",
            &json!({ "model": model_id, "input": texts }),
        )?;
        let mut parsed: EmbeddingResponse =
            serde_json::from_value(value).map_err(|e| BackendError::Malformed(e.to_string()))?;
        parsed.data.sort_by_key(|d| d.index);
        Ok(parsed.data.into_iter().map(|d| d.embedding).collect())
    }
}
