//! Thin async client for the annotation service.

use reprompt_core::annostudio::wire::{ErrorBody, Health, ItemView, NextResponse, ScoreRequest, ScoreResponse};
use reprompt_core::annostudio::Aggregate;
use serde::de::DeserializeOwned;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),

    /// The service answered with a structured error.
    #[error("{} ({status}): {}", body.error, body.message)]
    Api { status: u16, body: ErrorBody },

    #[error("unexpected response ({status}): {text}")]
    Unexpected { status: u16, text: String },
}

impl ClientError {
    pub fn code(&self) -> &str {
        match self {
            ClientError::Http(_) => "unreachable",
            ClientError::Api { body, .. } => &body.error,
            ClientError::Unexpected { .. } => "unexpected_response",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnnotationClient {
    base: String,
    http: reqwest::Client,
}

impl AnnotationClient {
    /// `base` is the service root, e.g. `http://127.0.0.1:8731`.
    pub fn new(base: impl Into<String>) -> Self {
        AnnotationClient { base: base.into().trim_end_matches('/').to_string(), http: reqwest::Client::new() }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn read<T: DeserializeOwned>(resp: reqwest::Response) -> Result<T, ClientError> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let text = resp.text().await?;
        match serde_json::from_str::<ErrorBody>(&text) {
            Ok(body) => Err(ClientError::Api { status: status.as_u16(), body }),
            Err(_) => Err(ClientError::Unexpected { status: status.as_u16(), text }),
        }
    }

    pub async fn health(&self) -> Result<Health, ClientError> {
        Self::read(self.http.get(format!("{}/api/health", self.base)).send().await?).await
    }

    pub async fn next(&self, annotator: Option<&str>, skip: &[String]) -> Result<NextResponse, ClientError> {
        let mut query: Vec<(&str, String)> = Vec::new();
        if let Some(a) = annotator {
            query.push(("annotator", a.to_string()));
        }
        if !skip.is_empty() {
            query.push(("skip", skip.join(",")));
        }
        let req = self.http.get(format!("{}/api/items/next", self.base)).query(&query);
        Self::read(req.send().await?).await
    }

    pub async fn item(&self, item_id: &str) -> Result<ItemView, ClientError> {
        let url = format!("{}/api/items/{}", self.base, encode_segment(item_id));
        Self::read(self.http.get(url).send().await?).await
    }

    pub async fn score(&self, item_id: &str, req: &ScoreRequest) -> Result<ScoreResponse, ClientError> {
        let url = format!("{}/api/items/{}/score", self.base, encode_segment(item_id));
        Self::read(self.http.post(url).json(req).send().await?).await
    }

    pub async fn aggregate(&self) -> Result<Aggregate, ClientError> {
        Self::read(self.http.get(format!("{}/api/aggregate", self.base)).send().await?).await
    }

    /// Raw export text; `format` is `csv` or `jsonl`.
    pub async fn export(&self, format: &str) -> Result<String, ClientError> {
        let resp = self.http.get(format!("{}/api/export", self.base)).query(&[("format", format)]).send().await?;
        let status = resp.status();
        let text = resp.text().await?;
        if status.is_success() {
            return Ok(text);
        }
        match serde_json::from_str::<ErrorBody>(&text) {
            Ok(body) => Err(ClientError::Api { status: status.as_u16(), body }),
            Err(_) => Err(ClientError::Unexpected { status: status.as_u16(), text }),
        }
    }
}

fn encode_segment(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' | b':' => out.push(b as char),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encodes_path_segments() {
        assert_eq!(encode_segment("few_shot_q2:open_qa-001"), "few_shot_q2:open_qa-001");
        assert_eq!(encode_segment("a/b c"), "a%2Fb%20c");
    }
}
