//! Scripted backend for offline runs and tests.
//!
//! Chat requests are answered by the first rule whose substrings (and
//! optional regex) all match the joined prompt text. A regex rule may use
//! `$1`/`$name` capture references in its response. Embeddings come from an
//! explicit table when present, otherwise from a hashed bag of words.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, BackendError, GatewayError, ModelRequest, RequestKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedFailure {
    Transport,
    RateLimited,
    ServerError,
    Unauthorized,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRule {
    /// Restrict the rule to one request kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<RequestKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contains: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regex: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail: Option<ScriptedFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockFixture {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub rules: Vec<MockRule>,
    #[serde(default)]
    pub default_response: Option<String>,
    #[serde(default)]
    pub embeddings: BTreeMap<String, Vec<f64>>,
    #[serde(default = "default_dim")]
    pub embedding_dim: usize,
    #[serde(default)]
    pub latency_ms: u64,
}

fn default_name() -> String {
    "mock".into()
}

fn default_dim() -> usize {
    64
}

impl Default for MockFixture {
    fn default() -> Self {
        Self {
            name: default_name(),
            rules: Vec::new(),
            default_response: None,
            embeddings: BTreeMap::new(),
            embedding_dim: default_dim(),
            latency_ms: 0,
        }
    }
}

struct CompiledRule {
    rule: MockRule,
    regex: Option<Regex>,
}

pub struct MockBackend {
    name: String,
    rules: Vec<CompiledRule>,
    default_response: Option<String>,
    embeddings: BTreeMap<String, Vec<f64>>,
    embedding_dim: usize,
    latency: Duration,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
}

impl MockBackend {
    pub fn new(fixture: MockFixture) -> Result<Self, GatewayError> {
        let rules = fixture
            .rules
            .into_iter()
            .map(|rule| {
                let regex = rule
                    .regex
                    .as_deref()
                    .map(Regex::new)
                    .transpose()
                    .map_err(|e| GatewayError::Config(format!("mock rule regex: {e}")))?;
                if rule.response.is_none() && rule.fail.is_none() {
                    return Err(GatewayError::Config(
                        "mock rule needs a response or a fail mode".into(),
                    ));
                }
                Ok(CompiledRule { rule, regex })
            })
            .collect::<Result<_, _>>()?;
        if fixture.embedding_dim == 0 {
            return Err(GatewayError::Config(
                "mock embedding_dim must be positive".into(),
            ));
        }
        Ok(Self {
            name: fixture.name,
            rules,
            default_response: fixture.default_response,
            embeddings: fixture.embeddings,
            embedding_dim: fixture.embedding_dim,
            latency: Duration::from_millis(fixture.latency_ms),
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            peak_in_flight: AtomicUsize::new(0),
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("mock fixture {}: {e}", path.display())))?;
        let fixture: MockFixture = serde_json::from_str(&text)
            .map_err(|e| GatewayError::Config(format!("mock fixture {}: {e}", path.display())))?;
        Self::new(fixture)
    }

    /// Total backend invocations (chat and embedding batches).
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }

    fn enter(&self) -> InFlight<'_> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        if !self.latency.is_zero() {
            std::thread::sleep(self.latency);
        }
        InFlight(&self.in_flight)
    }

    fn hashed_embedding(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.embedding_dim];
        let bucket = |token: &str| {
            let digest = Sha256::digest(token.as_bytes());
            let mut head = [0u8; 8];
            head.copy_from_slice(&digest[..8]);
            (u64::from_le_bytes(head) % self.embedding_dim as u64) as usize
        };
        let lowered = text.to_lowercase();
        let mut any = false;
        for token in lowered
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
        {
            v[bucket(token)] += 1.0;
            any = true;
        }
        if !any {
            v[bucket(text)] = 1.0;
        }
        v
    }
}

struct InFlight<'a>(&'a AtomicUsize);

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

impl Backend for MockBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn chat(&self, request: &ModelRequest) -> Result<String, BackendError> {
        let _guard = self.enter();
        let prompt = request.prompt_text();
        for compiled in &self.rules {
            let rule = &compiled.rule;
            if rule.kind.is_some_and(|k| k != request.kind) {
                continue;
            }
            if !rule
                .contains
                .iter()
                .all(|needle| prompt.contains(needle.as_str()))
            {
                continue;
            }
            let captures = match &compiled.regex {
                Some(re) => match re.captures(&prompt) {
                    Some(c) => Some(c),
                    None => continue,
                },
                None => None,
            };
            if let Some(failure) = rule.fail {
                return Err(match failure {
                    ScriptedFailure::Transport => {
                        BackendError::Transport("scripted failure".into())
                    }
                    ScriptedFailure::RateLimited => BackendError::RateLimited,
                    ScriptedFailure::ServerError => BackendError::Status {
                        status: 500,
                        body: "scripted failure".into(),
                    },
                    ScriptedFailure::Unauthorized => BackendError::Status {
                        status: 401,
                        body: "scripted failure".into(),
                    },
                });
            }
            let template = rule.response.as_deref().unwrap_or_default();
            return Ok(match captures {
                Some(caps) => {
                    let mut out = String::new();
                    caps.expand(template, &mut out);
                    out
                }
                None => template.to_string(),
            });
        }
        self.default_response
            .clone()
            .ok_or_else(|| BackendError::Config("no mock rule matches the prompt".into()))
    }

    fn embed(&self, _model_id: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        let _guard = self.enter();
        Ok(texts
            .iter()
            .map(|t| {
                self.embeddings
                    .get(t)
                    .cloned()
                    .unwrap_or_else(|| self.hashed_embedding(t))
            })
            .collect())
    }
}
