//! Model clients: chat-completions and Gemini dialects, a local model
//! server, and deterministic mocks.
//!
//! Every client enforces the model's `max_parallel` and `requests_per_minute`
//! limits and retries transient failures with exponential backoff. Time is
//! read from the tokio clock, so a paused runtime drives mocks in virtual
//! time.
//!
//! Mock fixture files are JSON lines:
//!
//! ```text
//! {"log_id": "log-000001", "raw_text": "{...}", "tokens_in": 412, "tokens_out": 38, "latency_ms": 900}
//! {"log_id": "log-000002", "error": {"status": 429, "message": "slow down", "times": 2}, "raw_text": "{...}"}
//! {"log_id": "log-000003", "error": {"message": "timed out"}}
//! ```
//!
//! An `error` without `times` fails every attempt; without `status` it is a
//! timeout. Missing token counts are estimated and flagged.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use maintbench_core::ratelimit::{classify_status, Backoff, ErrorClass, SlidingWindow};
use maintbench_core::{estimate_tokens, FailureKind, ModelConfig, ProviderKind, TokenUsage};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::Semaphore;
use tokio::time::Instant;

use crate::error::{Error, IoContext, Result};

pub const REQUEST_TIMEOUT: Duration = Duration::from_secs(120);

/// One prompt to send.
#[derive(Debug, Clone)]
pub struct Request {
    /// Fixture lookup key; the log id for classification.
    pub key: String,
    pub prompt: String,
    /// Text returned by the echo mock after its prefix.
    pub echo_text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub raw_text: String,
    pub usage: TokenUsage,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallFailure {
    pub kind: FailureKind,
    pub detail: String,
    pub raw_text: Option<String>,
    pub usage: TokenUsage,
    pub attempts: u32,
}

/// Send and completion instants of one attempt, measured from client creation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dispatch {
    pub start: Duration,
    pub end: Duration,
}

#[derive(Debug, Clone, Deserialize)]
struct FixtureError {
    #[serde(default)]
    status: Option<u16>,
    #[serde(default)]
    message: String,
    #[serde(default)]
    times: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
struct FixtureEntry {
    log_id: String,
    #[serde(default)]
    raw_text: Option<String>,
    #[serde(default)]
    tokens_in: Option<u64>,
    #[serde(default)]
    tokens_out: Option<u64>,
    #[serde(default)]
    latency_ms: u64,
    #[serde(default)]
    error: Option<FixtureError>,
}

#[derive(Debug)]
enum Backend {
    Http { dialect: ProviderKind, url: String, key: Option<String>, http: reqwest::Client },
    Fixture { entries: HashMap<String, FixtureEntry>, tries: Mutex<HashMap<String, u32>> },
    Echo { prefix: String },
}

struct Raw {
    text: String,
    tokens_in: Option<u64>,
    tokens_out: Option<u64>,
}

enum AttemptError {
    Status {
        status: u16,
        body: String,
    },
    /// Timeouts and connection failures.
    Network(String),
    Malformed(String),
    Truncated(Raw),
}

fn load_fixture(path: &Path) -> Result<HashMap<String, FixtureEntry>> {
    let text = std::fs::read_to_string(path).at(path)?;
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: FixtureEntry = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            column: e.column(),
            message: e.to_string(),
        })?;
        out.insert(entry.log_id.clone(), entry);
    }
    Ok(out)
}

/// Reads the API key a model needs, failing by name when it is not set.
pub fn api_key(config: &ModelConfig) -> Result<Option<String>> {
    match &config.auth {
        Some(var) => match std::env::var(var) {
            Ok(v) if !v.is_empty() => Ok(Some(v)),
            _ if config.provider_kind.is_hosted() => {
                Err(Error::MissingAuth { model: config.model_id.clone(), var: var.clone() })
            }
            _ => Ok(None),
        },
        None => Ok(None),
    }
}

pub struct Client {
    config: ModelConfig,
    backend: Backend,
    permits: Semaphore,
    window: Mutex<SlidingWindow>,
    backoff: Backoff,
    origin: Instant,
    dispatches: Mutex<Vec<Dispatch>>,
}

impl Client {
    /// Builds a client, reading the API key from the environment.
    pub fn new(config: &ModelConfig) -> Result<Arc<Self>> {
        let key = api_key(config)?;
        Self::with_key(config, key)
    }

    pub fn with_key(config: &ModelConfig, key: Option<String>) -> Result<Arc<Self>> {
        let backend = match config.provider_kind {
            ProviderKind::Mock => match config.endpoint.strip_prefix("echo:") {
                Some(prefix) => Backend::Echo { prefix: prefix.to_string() },
                None => Backend::Fixture {
                    entries: load_fixture(Path::new(&config.endpoint))?,
                    tries: Mutex::new(HashMap::new()),
                },
            },
            dialect => {
                let http = reqwest::Client::builder()
                    .timeout(REQUEST_TIMEOUT)
                    .build()
                    .map_err(|e| Error::Runtime(e.to_string()))?;
                let url = match dialect {
                    ProviderKind::Gemini if !config.endpoint.contains(":generateContent") => format!(
                        "{}/models/{}:generateContent",
                        config.endpoint.trim_end_matches('/'),
                        config.wire_model()
                    ),
                    _ => config.endpoint.clone(),
                };
                Backend::Http { dialect, url, key, http }
            }
        };
        Ok(Arc::new(Client {
            config: config.clone(),
            backend,
            permits: Semaphore::new(config.max_parallel.max(1) as usize),
            window: Mutex::new(SlidingWindow::per_minute(config.requests_per_minute)),
            backoff: Backoff::new(Duration::from_millis(config.backoff_base_ms)),
            origin: Instant::now(),
            dispatches: Mutex::new(Vec::new()),
        }))
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Every attempt sent so far.
    pub fn dispatches(&self) -> Vec<Dispatch> {
        self.dispatches.lock().expect("dispatch log").clone()
    }

    async fn pace(&self) {
        loop {
            let now = self.origin.elapsed();
            let wait = self.window.lock().expect("limiter").try_acquire(now);
            match wait {
                Ok(()) => return,
                Err(at) => tokio::time::sleep_until(self.origin + at).await,
            }
        }
    }

    /// Sends one prompt with retries. Never panics on provider behaviour;
    /// every problem becomes a [`CallFailure`].
    pub async fn classify(&self, request: &Request) -> std::result::Result<Reply, CallFailure> {
        let started = Instant::now();
        let max_attempts = self.config.max_retries + 1;
        let mut attempts = 0;
        loop {
            attempts += 1;
            let result = {
                let _permit = self.permits.acquire().await.expect("semaphore open");
                self.pace().await;
                let start = self.origin.elapsed();
                let r = self.attempt(request).await;
                let end = self.origin.elapsed();
                self.dispatches.lock().expect("dispatch log").push(Dispatch { start, end });
                r
            };
            let latency = started.elapsed().as_secs_f64();
            let failure = |kind, detail: String, raw: Option<Raw>| {
                let usage = raw
                    .as_ref()
                    .map(|r| self.usage(request, r, latency))
                    .unwrap_or(TokenUsage { latency, ..TokenUsage::default() });
                CallFailure { kind, detail, raw_text: raw.map(|r| r.text), usage, attempts }
            };
            let retry_reason = match result {
                Ok(raw) => {
                    return Ok(Reply { usage: self.usage(request, &raw, latency), raw_text: raw.text, attempts });
                }
                Err(AttemptError::Truncated(raw)) => {
                    return Err(failure(
                        FailureKind::OverLimit,
                        "response truncated at the token limit".into(),
                        Some(raw),
                    ));
                }
                Err(AttemptError::Malformed(detail)) => {
                    return Err(failure(FailureKind::Transport, format!("malformed response: {detail}"), None));
                }
                Err(AttemptError::Status { status, body }) => match classify_status(status, &body) {
                    ErrorClass::Fatal(kind) => {
                        return Err(failure(kind, format!("HTTP {status}: {}", truncate(&body, 300)), None));
                    }
                    ErrorClass::Retryable => format!("HTTP {status}: {}", truncate(&body, 300)),
                },
                Err(AttemptError::Network(detail)) => detail,
            };
            if attempts >= max_attempts {
                return Err(failure(
                    FailureKind::Transport,
                    format!("retries exhausted after {attempts} attempts; last error {retry_reason}"),
                    None,
                ));
            }
            tracing::debug!(model = %self.config.model_id, key = %request.key, attempts, %retry_reason, "retrying");
            tokio::time::sleep(self.backoff.delay(attempts)).await;
        }
    }

    fn usage(&self, request: &Request, raw: &Raw, latency: f64) -> TokenUsage {
        TokenUsage {
            tokens_in: raw.tokens_in.unwrap_or_else(|| estimate_tokens(&request.prompt)),
            tokens_out: raw.tokens_out.unwrap_or_else(|| estimate_tokens(&raw.text)),
            latency,
            estimated: raw.tokens_in.is_none() || raw.tokens_out.is_none(),
        }
    }

    async fn attempt(&self, request: &Request) -> std::result::Result<Raw, AttemptError> {
        match &self.backend {
            Backend::Echo { prefix } => Ok(Raw {
                text: format!("{prefix}{}", request.echo_text),
                tokens_in: Some(estimate_tokens(&request.prompt)),
                tokens_out: Some(estimate_tokens(&request.echo_text)),
            }),
            Backend::Fixture { entries, tries } => {
                let Some(entry) = entries.get(&request.key) else {
                    return Err(AttemptError::Status {
                        status: 404,
                        body: format!("no fixture entry for {:?}", request.key),
                    });
                };
                let n = {
                    let mut t = tries.lock().expect("fixture counters");
                    let n = t.entry(request.key.clone()).or_insert(0);
                    *n += 1;
                    *n
                };
                tokio::time::sleep(Duration::from_millis(entry.latency_ms)).await;
                if let Some(err) = &entry.error {
                    if err.times.is_none_or(|t| n <= t) {
                        return Err(match err.status {
                            Some(status) => AttemptError::Status { status, body: err.message.clone() },
                            None => AttemptError::Network(format!("timeout: {}", err.message)),
                        });
                    }
                }
                match &entry.raw_text {
                    Some(text) => {
                        Ok(Raw { text: text.clone(), tokens_in: entry.tokens_in, tokens_out: entry.tokens_out })
                    }
                    None => Err(AttemptError::Malformed("fixture entry has no raw_text".into())),
                }
            }
            Backend::Http { dialect, url, key, http } => {
                self.attempt_http(*dialect, url, key.as_deref(), http, request).await
            }
        }
    }

    async fn attempt_http(
        &self,
        dialect: ProviderKind,
        url: &str,
        key: Option<&str>,
        http: &reqwest::Client,
        request: &Request,
    ) -> std::result::Result<Raw, AttemptError> {
        let model = self.config.wire_model();
        let (body, builder) = match dialect {
            ProviderKind::Gemini => {
                let b = json!({"contents": [{"role": "user", "parts": [{"text": request.prompt}]}]});
                let mut req = http.post(url);
                if let Some(k) = key {
                    req = req.header("x-goog-api-key", k);
                }
                (b, req)
            }
            ProviderKind::LocalServer => {
                let b = json!({"model": model, "prompt": request.prompt, "stream": false});
                let mut req = http.post(url);
                if let Some(k) = key {
                    req = req.bearer_auth(k);
                }
                (b, req)
            }
            _ => {
                let b = json!({"model": model, "messages": [{"role": "user", "content": request.prompt}]});
                let mut req = http.post(url);
                if let Some(k) = key {
                    req = req.bearer_auth(k);
                }
                (b, req)
            }
        };
        let resp = builder.json(&body).send().await.map_err(|e| {
            if e.is_timeout() || e.is_connect() || e.is_request() {
                AttemptError::Network(e.to_string())
            } else {
                AttemptError::Malformed(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        let text = resp.text().await.map_err(|e| AttemptError::Network(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(AttemptError::Status { status, body: text });
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| AttemptError::Malformed(e.to_string()))?;
        parse_reply(dialect, &v).ok_or_else(|| AttemptError::Malformed(truncate(&text, 300).to_string()))?
    }
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// Maps a provider body to text and usage. `None` when the body lacks the
/// dialect's required fields.
fn parse_reply(dialect: ProviderKind, v: &Value) -> Option<std::result::Result<Raw, AttemptError>> {
    let count = |x: &Value| x.as_u64();
    let (text, tokens_in, tokens_out, truncated) = match dialect {
        ProviderKind::Gemini => {
            let cand = v.get("candidates")?.get(0)?;
            let parts = cand.get("content")?.get("parts")?.as_array()?;
            let text: String = parts.iter().filter_map(|p| p.get("text")?.as_str()).collect();
            let meta = v.get("usageMetadata");
            (
                text,
                meta.and_then(|m| count(m.get("promptTokenCount")?)),
                meta.and_then(|m| count(m.get("candidatesTokenCount")?)),
                cand.get("finishReason").and_then(Value::as_str) == Some("MAX_TOKENS"),
            )
        }
        ProviderKind::LocalServer => (
            v.get("response")?.as_str()?.to_string(),
            v.get("prompt_eval_count").and_then(count),
            v.get("eval_count").and_then(count),
            v.get("done_reason").and_then(Value::as_str) == Some("length"),
        ),
        _ => {
            let choice = v.get("choices")?.get(0)?;
            let usage = v.get("usage");
            (
                choice.get("message")?.get("content")?.as_str()?.to_string(),
                usage.and_then(|u| count(u.get("prompt_tokens")?)),
                usage.and_then(|u| count(u.get("completion_tokens")?)),
                choice.get("finish_reason").and_then(Value::as_str) == Some("length"),
            )
        }
    };
    let raw = Raw { text, tokens_in, tokens_out };
    Some(if truncated { Err(AttemptError::Truncated(raw)) } else { Ok(raw) })
}
