//! Provider-agnostic chat-completion client with deterministic mock and
//! record/replay cache backends.

mod cache;
mod providers;

pub use cache::{read_cache, CacheEntry, CacheWriter, RecordingProvider, ReplayProvider};
pub use providers::{
    CountingProvider, LiveProvider, MockProvider, MockRule, RateLimiter, ENV_API_KEY,
    ENV_ENDPOINT, ENV_MODEL,
};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Which benchmark an exemplar set / config default targets. Drives the
/// stage hyper-parameter and shot-count defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    WikiTq,
    FeTaQa,
    TabFact,
    WikiSql,
}

impl Benchmark {
    /// Few-shot counts for the sub-table selection stage.
    pub fn selection_shots(self) -> usize {
        match self {
            Benchmark::WikiTq | Benchmark::WikiSql => 10,
            Benchmark::FeTaQa => 6,
            Benchmark::TabFact => 8,
        }
    }

    /// Few-shot counts for the answer generation stage.
    pub fn answer_shots(self) -> usize {
        match self {
            Benchmark::WikiTq | Benchmark::WikiSql => 2,
            Benchmark::FeTaQa => 6,
            Benchmark::TabFact => 4,
        }
    }
}

/// Decoding parameters for one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LLMConfig {
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub n_samples: u32,
    pub max_tokens: u32,
}

impl LLMConfig {
    /// Defaults for the sub-table selection stage (all benchmarks).
    pub fn selection_defaults(model: &str) -> Self {
        LLMConfig {
            model: model.to_string(),
            temperature: 0.3,
            top_p: 1.0,
            n_samples: 1,
            max_tokens: 100,
        }
    }

    /// Defaults for the answer generation stage, per benchmark.
    pub fn answer_defaults(model: &str, benchmark: Benchmark) -> Self {
        let (temperature, max_tokens) = match benchmark {
            Benchmark::WikiTq | Benchmark::WikiSql => (0.7, 200),
            Benchmark::FeTaQa => (0.7, 64),
            Benchmark::TabFact => (0.6, 100),
        };
        LLMConfig {
            model: model.to_string(),
            temperature,
            top_p: 1.0,
            n_samples: 1,
            max_tokens,
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::Config(format!(
                "temperature {} out of range [0, 2]",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(LlmError::Config(format!(
                "top_p {} out of range (0, 1]",
                self.top_p
            )));
        }
        if self.n_samples == 0 {
            return Err(LlmError::Config("n_samples must be positive".into()));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::Config("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub config: LLMConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    /// Exactly `n_samples` completion texts on success.
    pub texts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<TokenUsage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
}

impl CompletionResponse {
    pub fn from_text(text: impl Into<String>) -> Self {
        CompletionResponse {
            texts: vec![text.into()],
            usage: None,
            latency_ms: None,
        }
    }

    /// First completion text, which is the only one under the default n=1.
    pub fn text(&self) -> &str {
        self.texts.first().map(|s| s.as_str()).unwrap_or("")
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("provider error{}: {message}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Provider {
        status: Option<u16>,
        message: String,
    },
    #[error("retries exhausted after {attempts} attempts: {last_error}")]
    Exhausted { attempts: u32, last_error: String },
    #[error("cache miss for key {key}")]
    CacheMiss { key: String },
    #[error("cache io error: {0}")]
    CacheIo(String),
    #[error("config error: {0}")]
    Config(String),
}

/// A chat-completion backend: live endpoint, scripted mock, or replay cache.
/// Implementations must be safe for concurrent calls.
pub trait Provider: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError>;

    fn name(&self) -> &str;
}

/// Collision-resistant digest over the full decoding configuration and the
/// prompt bytes; stable across runs and platforms.
pub fn cache_key(req: &CompletionRequest) -> String {
    let c = &req.config;
    let mut hasher = Sha256::new();
    hasher.update(b"model\n");
    hasher.update(c.model.as_bytes());
    hasher.update(b"\ntemperature\n");
    hasher.update(c.temperature.to_string().as_bytes());
    hasher.update(b"\ntop_p\n");
    hasher.update(c.top_p.to_string().as_bytes());
    hasher.update(b"\nn_samples\n");
    hasher.update(c.n_samples.to_string().as_bytes());
    hasher.update(b"\nmax_tokens\n");
    hasher.update(c.max_tokens.to_string().as_bytes());
    hasher.update(b"\nprompt\n");
    hasher.update(req.prompt.as_bytes());
    hex::encode(hasher.finalize())
}
