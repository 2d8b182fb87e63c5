//! Provider backends: scripted mock, live HTTP endpoint with retry and
//! rate limiting, and a call-counting wrapper.

use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use super::{CompletionRequest, CompletionResponse, LlmError, Provider, TokenUsage};

/// One scripted response: fires when every `match_all` substring is present
/// in the prompt. Rules are checked in order; first match wins.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockRule {
    pub match_all: Vec<String>,
    pub response: String,
}

/// Deterministic scripted provider for tests and offline runs.
pub struct MockProvider {
    rules: Vec<MockRule>,
}

impl MockProvider {
    pub fn new(rules: Vec<MockRule>) -> Self {
        MockProvider { rules }
    }

    /// Convenience constructor: one substring per response.
    pub fn scripted<S: Into<String>, R: Into<String>>(pairs: Vec<(S, R)>) -> Self {
        MockProvider {
            rules: pairs
                .into_iter()
                .map(|(m, r)| MockRule {
                    match_all: vec![m.into()],
                    response: r.into(),
                })
                .collect(),
        }
    }

    /// Loads rules from a line-delimited JSON script file.
    pub fn from_script_file(path: &Path) -> Result<Self, LlmError> {
        let file =
            File::open(path).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        let mut rules = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| LlmError::Config(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rule: MockRule = serde_json::from_str(&line)
                .map_err(|e| LlmError::Config(format!("script line {}: {e}", i + 1)))?;
            rules.push(rule);
        }
        Ok(MockProvider { rules })
    }
}

impl Provider for MockProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        for rule in &self.rules {
            if rule.match_all.iter().all(|m| req.prompt.contains(m)) {
                return Ok(CompletionResponse {
                    texts: vec![rule.response.clone(); req.config.n_samples as usize],
                    usage: None,
                    latency_ms: None,
                });
            }
        }
        Err(LlmError::Provider {
            status: None,
            message: "no mock rule matched the prompt".into(),
        })
    }

    fn name(&self) -> &str {
        "mock"
    }
}

/// Counts completions passing through; used for call-budget assertions and
/// batch cost reporting.
pub struct CountingProvider {
    inner: Box<dyn Provider>,
    calls: AtomicUsize,
}

impl CountingProvider {
    pub fn new(inner: Box<dyn Provider>) -> Self {
        CountingProvider {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Provider for CountingProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(req)
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

/// Token-bucket limiter over requests per minute. `acquire` blocks the
/// calling worker until a slot is free.
pub struct RateLimiter {
    state: Mutex<BucketState>,
    capacity: f64,
    refill_per_sec: f64,
}

struct BucketState {
    tokens: f64,
    last: Instant,
}

impl RateLimiter {
    pub fn per_minute(requests: u32) -> Self {
        let capacity = requests.max(1) as f64;
        RateLimiter {
            state: Mutex::new(BucketState {
                tokens: capacity,
                last: Instant::now(),
            }),
            capacity,
            refill_per_sec: capacity / 60.0,
        }
    }

    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut s = self.state.lock().expect("rate limiter poisoned");
                let now = Instant::now();
                let elapsed = now.duration_since(s.last).as_secs_f64();
                s.tokens = (s.tokens + elapsed * self.refill_per_sec).min(self.capacity);
                s.last = now;
                if s.tokens >= 1.0 {
                    s.tokens -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - s.tokens) / self.refill_per_sec)
            };
            std::thread::sleep(wait.min(Duration::from_millis(250)));
        }
    }
}

/// Environment variables read by [`LiveProvider::from_env`].
pub const ENV_ENDPOINT: &str = "SUBTAB_LLM_URL";
pub const ENV_API_KEY: &str = "SUBTAB_LLM_KEY";
pub const ENV_MODEL: &str = "SUBTAB_LLM_MODEL";

/// Chat-completions HTTP client (OpenAI-compatible payload) with
/// exponential-backoff retries on transient failures.
pub struct LiveProvider {
    endpoint: String,
    api_key: String,
    client: reqwest::blocking::Client,
    max_attempts: u32,
    backoff_base: Duration,
    rate: Option<RateLimiter>,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatPayload<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    top_p: f64,
    n: u32,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessageOwned,
}

#[derive(Deserialize)]
struct ChatMessageOwned {
    content: String,
}

#[derive(Deserialize)]
struct ChatUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    usage: Option<ChatUsage>,
}

impl LiveProvider {
    pub fn new(endpoint: String, api_key: String) -> Self {
        LiveProvider {
            endpoint,
            api_key,
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("http client"),
            max_attempts: 5,
            backoff_base: Duration::from_millis(500),
            rate: None,
        }
    }

    /// Reads endpoint URL and credential from the environment.
    pub fn from_env() -> Result<Self, LlmError> {
        let endpoint = std::env::var(ENV_ENDPOINT)
            .map_err(|_| LlmError::Config(format!("{ENV_ENDPOINT} not set")))?;
        let api_key = std::env::var(ENV_API_KEY)
            .map_err(|_| LlmError::Config(format!("{ENV_API_KEY} not set")))?;
        Ok(Self::new(endpoint, api_key))
    }

    pub fn with_max_attempts(mut self, attempts: u32) -> Self {
        self.max_attempts = attempts.max(1);
        self
    }

    pub fn with_requests_per_minute(mut self, rpm: u32) -> Self {
        self.rate = Some(RateLimiter::per_minute(rpm));
        self
    }

    fn attempt(&self, req: &CompletionRequest) -> Result<CompletionResponse, AttemptError> {
        let payload = ChatPayload {
            model: &req.config.model,
            messages: vec![ChatMessage {
                role: "user",
                content: &req.prompt,
            }],
            temperature: req.config.temperature,
            top_p: req.config.top_p,
            n: req.config.n_samples,
            max_tokens: req.config.max_tokens,
        };
        let started = Instant::now();
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&payload)
            .send()
            .map_err(|e| AttemptError::Transient(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(AttemptError::Transient(format!("status {status}")));
        }
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(AttemptError::Fatal {
                status: status.as_u16(),
                message: body.chars().take(500).collect(),
            });
        }
        let parsed: ChatResponse = resp
            .json()
            .map_err(|e| AttemptError::Transient(format!("bad response body: {e}")))?;
        let texts: Vec<String> = parsed
            .choices
            .into_iter()
            .map(|c| c.message.content)
            .collect();
        if texts.len() != req.config.n_samples as usize {
            return Err(AttemptError::Fatal {
                status: status.as_u16(),
                message: format!(
                    "expected {} completions, got {}",
                    req.config.n_samples,
                    texts.len()
                ),
            });
        }
        Ok(CompletionResponse {
            texts,
            usage: parsed.usage.map(|u| TokenUsage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
            }),
            latency_ms: Some(started.elapsed().as_millis() as u64),
        })
    }
}

enum AttemptError {
    Transient(String),
    Fatal { status: u16, message: String },
}

impl Provider for LiveProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        req.config.validate()?;
        let mut last_error = String::new();
        for attempt in 0..self.max_attempts {
            if let Some(rate) = &self.rate {
                rate.acquire();
            }
            match self.attempt(req) {
                Ok(resp) => return Ok(resp),
                Err(AttemptError::Fatal { status, message }) => {
                    return Err(LlmError::Provider {
                        status: Some(status),
                        message,
                    })
                }
                Err(AttemptError::Transient(msg)) => {
                    last_error = msg;
                    if attempt + 1 < self.max_attempts {
                        std::thread::sleep(self.backoff_base * 2u32.pow(attempt));
                    }
                }
            }
        }
        Err(LlmError::Exhausted {
            attempts: self.max_attempts,
            last_error,
        })
    }

    fn name(&self) -> &str {
        "live"
    }
}
