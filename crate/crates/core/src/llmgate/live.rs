use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Semaphore;
use tracing::{debug, warn};

use super::{CompletionRequest, EmbeddingVector, Gateway, GatewayError};

pub const DEFAULT_API_KEY_ENV: &str = "REPROMPT_API_KEY";
const MAX_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveConfig {
    /// Base URL up to and including the version prefix, e.g. `http://host:8000/v1`.
    pub base_url: String,
    pub model: String,
    /// Model used for `/embeddings`; sentence embeddings are unsupported without one.
    #[serde(default)]
    pub embedding_model: Option<String>,
    #[serde(default)]
    pub api_key: Option<String>,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

fn default_max_in_flight() -> usize {
    4
}

fn default_timeout_secs() -> u64 {
    120
}

fn default_backoff_ms() -> u64 {
    500
}

impl LiveConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            embedding_model: None,
            api_key: None,
            max_in_flight: default_max_in_flight(),
            timeout_secs: default_timeout_secs(),
            backoff_ms: default_backoff_ms(),
        }
    }

    /// Reads the bearer token from `var` if it is set and non-empty.
    pub fn with_api_key_from_env(mut self, var: &str) -> Self {
        self.api_key = std::env::var(var).ok().filter(|k| !k.is_empty());
        self
    }
}

/// Chat-completions client with bounded concurrency and retries.
///
/// Connection failures, 429 and 5xx responses are retried with exponential
/// backoff, at most three attempts in total. Other 4xx responses fail at once.
#[derive(Debug, Clone)]
pub struct LiveGateway {
    config: LiveConfig,
    http: reqwest::Client,
    permits: Arc<Semaphore>,
}

impl LiveGateway {
    pub fn new(config: LiveConfig) -> Result<Self, GatewayError> {
        if config.base_url.trim().is_empty() {
            return Err(GatewayError::Config("base_url is required".into()));
        }
        if config.model.trim().is_empty() {
            return Err(GatewayError::Config("model is required".into()));
        }
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        let permits = Arc::new(Semaphore::new(config.max_in_flight.max(1)));
        Ok(Self { config, http, permits })
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.base_url.trim_end_matches('/'), path)
    }

    /// Builds the JSON body for a completion request.
    pub fn completion_body(&self, request: &CompletionRequest) -> Value {
        let p = &request.params;
        let mut body = json!({
            "model": self.config.model,
            "messages": [{ "role": "user", "content": request.prompt }],
            "temperature": p.temperature,
            "top_p": p.top_p,
            "max_tokens": p.max_tokens,
            "seed": p.seed,
        });
        if let Some(k) = p.top_k {
            body["top_k"] = json!(k);
        }
        body
    }

    async fn post_json(&self, path: &str, body: &Value) -> Result<Value, GatewayError> {
        let _permit = self
            .permits
            .acquire()
            .await
            .map_err(|_| GatewayError::Config("gateway closed".into()))?;
        let url = self.url(path);
        let mut last_error = String::new();

        for attempt in 1..=MAX_ATTEMPTS {
            if attempt > 1 {
                let delay = self.config.backoff_ms * (1 << (attempt - 2));
                tokio::time::sleep(Duration::from_millis(delay)).await;
            }
            let mut req = self.http.post(&url).json(body);
            if let Some(key) = &self.config.api_key {
                req = req.bearer_auth(key);
            }
            match req.send().await {
                Ok(resp) => {
                    let status = resp.status();
                    let text = resp.text().await.unwrap_or_default();
                    if status.is_success() {
                        return serde_json::from_str(&text).map_err(|e| GatewayError::Provider {
                            status: status.as_u16(),
                            message: format!("unparseable response body: {e}"),
                        });
                    }
                    let message = provider_message(&text);
                    if status.as_u16() == 429 || status.is_server_error() {
                        warn!(attempt, status = status.as_u16(), "retryable provider status");
                        last_error = format!("status {}: {message}", status.as_u16());
                        continue;
                    }
                    return Err(GatewayError::Provider { status: status.as_u16(), message });
                }
                Err(e) => {
                    warn!(attempt, error = %e, "request failed");
                    last_error = e.to_string();
                }
            }
        }
        Err(GatewayError::Transport {
            attempts: MAX_ATTEMPTS,
            message: last_error,
        })
    }
}

fn provider_message(body: &str) -> String {
    serde_json::from_str::<Value>(body)
        .ok()
        .and_then(|v| v.pointer("/error/message").and_then(Value::as_str).map(str::to_string))
        .unwrap_or_else(|| body.chars().take(500).collect())
}

#[async_trait]
impl Gateway for LiveGateway {
    fn identity(&self) -> String {
        format!("live:{}", self.config.model)
    }

    fn max_in_flight(&self) -> usize {
        self.config.max_in_flight.max(1)
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let body = self.completion_body(request);
        debug!(model = %self.config.model, "chat completion");
        let value = self.post_json("chat/completions", &body).await?;
        let choice = value.pointer("/choices/0").ok_or_else(|| GatewayError::Provider {
            status: 200,
            message: "response has no choices".into(),
        })?;
        choice
            .pointer("/message/content")
            .or_else(|| choice.get("text"))
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| GatewayError::Provider {
                status: 200,
                message: "choice has no text content".into(),
            })
    }

    async fn sentence_embed(&self, text: &str) -> Result<EmbeddingVector, GatewayError> {
        if text.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("cannot embed empty text".into()));
        }
        let model = self
            .config
            .embedding_model
            .as_ref()
            .ok_or(GatewayError::Unsupported("sentence embeddings"))?;
        let value = self
            .post_json("embeddings", &json!({ "model": model, "input": text }))
            .await?;
        let values: Vec<f64> = value
            .pointer("/data/0/embedding")
            .and_then(|v| serde_json::from_value(v.clone()).ok())
            .ok_or_else(|| GatewayError::Provider {
                status: 200,
                message: "embedding response has no data[0].embedding".into(),
            })?;
        if values.is_empty() {
            return Err(GatewayError::Provider { status: 200, message: "empty embedding".into() });
        }
        Ok(EmbeddingVector::new(values))
    }

    async fn token_embed(&self, _text: &str) -> Result<Vec<EmbeddingVector>, GatewayError> {
        Err(GatewayError::Unsupported("token embeddings"))
    }
}
