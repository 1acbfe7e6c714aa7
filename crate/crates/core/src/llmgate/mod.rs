//! Uniform access to text-generation and embedding backends.
//!
//! [`LiveGateway`] speaks an OpenAI-style chat-completions protocol over
//! HTTP; [`MockGateway`] answers from fixtures keyed by prompt hash so whole
//! pipelines run offline and deterministically.

mod live;
mod mock;
pub mod sampler;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use live::{LiveConfig, LiveGateway, DEFAULT_API_KEY_ENV};
pub use mock::{CompletionFixture, FixtureLine, MockGateway, TokenRowsFixture, DEFAULT_MOCK_DIMENSION};
pub use sampler::{sample_token, truncated_distribution};

pub const DEFAULT_MAX_TOKENS: u32 = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("provider returned an error (status {status}): {message}")]
    Provider { status: u16, message: String },

    #[error("no fixture for prompt hash {prompt_hash}")]
    FixtureMiss { prompt_hash: String },

    #[error("provider does not support {0}")]
    Unsupported(&'static str),

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("gateway configuration: {0}")]
    Config(String),
}

/// Sampling settings passed with every generation call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_p: f64,
    /// `None` means no top-k truncation.
    pub top_k: Option<u32>,
    pub max_tokens: u32,
    pub seed: u64,
}

impl GenerationParams {
    /// Response generation for corpus prompts: T 0.5, top_p 0.9, top_k 50.
    pub fn response_generation() -> Self {
        Self {
            temperature: 0.5,
            top_p: 0.9,
            top_k: Some(50),
            max_tokens: DEFAULT_MAX_TOKENS,
            seed: 0,
        }
    }

    /// Synthetic instruction generation: T 1.5, top_p 0.9, top_k 200.
    pub fn synthetic_generation() -> Self {
        Self {
            temperature: 1.5,
            top_p: 0.9,
            top_k: Some(200),
            max_tokens: DEFAULT_MAX_TOKENS,
            seed: 0,
        }
    }

    /// Prompt recovery: low temperature 0.4, no truncation.
    pub fn recovery() -> Self {
        Self {
            temperature: 0.4,
            top_p: 1.0,
            top_k: None,
            max_tokens: DEFAULT_MAX_TOKENS,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let mut problems = Vec::new();
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            problems.push(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            problems.push(format!("top_p must be in (0, 1], got {}", self.top_p));
        }
        if self.top_k == Some(0) {
            problems.push("top_k must be >= 1 when set".to_string());
        }
        if self.max_tokens == 0 {
            problems.push("max_tokens must be >= 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(GatewayError::InvalidRequest(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    /// Fully rendered prompt, chat markers included.
    pub prompt: String,
    pub params: GenerationParams,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, params: GenerationParams) -> Result<Self, GatewayError> {
        let prompt = prompt.into();
        if prompt.is_empty() {
            return Err(GatewayError::InvalidRequest("prompt must be non-empty".into()));
        }
        params.validate()?;
        Ok(Self { prompt, params })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

#[async_trait]
pub trait Gateway: Send + Sync {
    /// Live model name or mock fixture digest, recorded in run manifests.
    fn identity(&self) -> String;

    /// Upper bound on concurrent requests callers should issue.
    fn max_in_flight(&self) -> usize;

    async fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError>;

    async fn sentence_embed(&self, text: &str) -> Result<EmbeddingVector, GatewayError>;

    /// One row per token under the shared tokenization.
    async fn token_embed(&self, text: &str) -> Result<Vec<EmbeddingVector>, GatewayError>;
}
