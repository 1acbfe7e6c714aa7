use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use async_trait::async_trait;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CompletionRequest, EmbeddingVector, Gateway, GatewayError};
use crate::digest::{hash64, hash64_hex, sha256_hex};
use crate::error::{Error, Result};
use crate::text::tokenize;

pub const DEFAULT_MOCK_DIMENSION: usize = 384;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionFixture {
    pub prompt_hash: String,
    /// Restricts the fixture to one request seed; `None` matches any seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub completion: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenRowsFixture {
    pub text_hash: String,
    pub rows: Vec<Vec<f64>>,
}

/// One line of a fixture file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FixtureLine {
    Completion(CompletionFixture),
    TokenRows(TokenRowsFixture),
}

impl FixtureLine {
    pub fn completion(prompt: &str, completion: impl Into<String>) -> Self {
        FixtureLine::Completion(CompletionFixture {
            prompt_hash: hash64_hex(prompt),
            seed: None,
            completion: completion.into(),
        })
    }

    pub fn seeded_completion(prompt: &str, seed: u64, completion: impl Into<String>) -> Self {
        FixtureLine::Completion(CompletionFixture {
            prompt_hash: hash64_hex(prompt),
            seed: Some(seed),
            completion: completion.into(),
        })
    }
}

/// Fixture-backed gateway: a pure function of (prompt, seed).
///
/// Completions come only from fixtures; a miss is an error carrying the
/// prompt hash. Embeddings are derived from text hashes unless a token-row
/// fixture overrides them. Vectors have nonnegative components, so every
/// cosine between mock embeddings lies in [0, 1].
#[derive(Debug, Clone)]
pub struct MockGateway {
    completions: HashMap<(String, Option<u64>), String>,
    token_rows: HashMap<String, Vec<Vec<f64>>>,
    dimension: usize,
}

impl Default for MockGateway {
    fn default() -> Self {
        Self::new()
    }
}

impl MockGateway {
    pub fn new() -> Self {
        Self {
            completions: HashMap::new(),
            token_rows: HashMap::new(),
            dimension: DEFAULT_MOCK_DIMENSION,
        }
    }

    pub fn with_dimension(mut self, dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        self.dimension = dimension;
        self
    }

    pub fn from_lines(lines: impl IntoIterator<Item = FixtureLine>) -> Self {
        let mut gw = Self::new();
        for line in lines {
            gw.insert(line);
        }
        gw
    }

    pub fn from_fixture_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_fixture_str(&text)
    }

    pub fn from_fixture_str(text: &str) -> Result<Self> {
        let mut gw = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: FixtureLine = serde_json::from_str(line).map_err(|e| {
                Error::InvalidArgument(format!("fixture line {}: {e}", i + 1))
            })?;
            gw.insert(parsed);
        }
        Ok(gw)
    }

    pub fn insert(&mut self, line: FixtureLine) {
        match line {
            FixtureLine::Completion(c) => {
                self.completions.insert((c.prompt_hash, c.seed), c.completion);
            }
            FixtureLine::TokenRows(t) => {
                self.token_rows.insert(t.text_hash, t.rows);
            }
        }
    }

    pub fn add_completion(&mut self, prompt: &str, completion: impl Into<String>) {
        self.insert(FixtureLine::completion(prompt, completion));
    }

    pub fn add_seeded_completion(&mut self, prompt: &str, seed: u64, completion: impl Into<String>) {
        self.insert(FixtureLine::seeded_completion(prompt, seed, completion));
    }

    pub fn len(&self) -> usize {
        self.completions.len() + self.token_rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Order-independent digest of the loaded fixtures.
    pub fn digest(&self) -> String {
        let mut sorted: BTreeMap<String, String> = BTreeMap::new();
        for ((hash, seed), completion) in &self.completions {
            let key = match seed {
                Some(s) => format!("c:{hash}:{s}"),
                None => format!("c:{hash}:*"),
            };
            sorted.insert(key, completion.clone());
        }
        for (hash, rows) in &self.token_rows {
            sorted.insert(format!("t:{hash}"), serde_json::to_string(rows).expect("rows serialize"));
        }
        sha256_hex(serde_json::to_string(&sorted).expect("map serializes"))
    }

    fn hashed_unit_vector(&self, domain: &str, text: &str) -> EmbeddingVector {
        let mut rng = ChaCha8Rng::seed_from_u64(hash64(format!("{domain}\0{text}")));
        let mut values: Vec<f64> = (0..self.dimension).map(|_| rng.random::<f64>()).collect();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut values {
            *v /= norm;
        }
        EmbeddingVector::new(values)
    }
}

#[async_trait]
impl Gateway for MockGateway {
    fn identity(&self) -> String {
        format!("mock:{}", self.digest())
    }

    fn max_in_flight(&self) -> usize {
        16
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let hash = hash64_hex(&request.prompt);
        self.completions
            .get(&(hash.clone(), Some(request.params.seed)))
            .or_else(|| self.completions.get(&(hash.clone(), None)))
            .cloned()
            .ok_or(GatewayError::FixtureMiss { prompt_hash: hash })
    }

    async fn sentence_embed(&self, text: &str) -> Result<EmbeddingVector, GatewayError> {
        if text.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("cannot embed empty text".into()));
        }
        Ok(self.hashed_unit_vector("sentence", text))
    }

    async fn token_embed(&self, text: &str) -> Result<Vec<EmbeddingVector>, GatewayError> {
        if let Some(rows) = self.token_rows.get(&hash64_hex(text)) {
            return Ok(rows.iter().cloned().map(EmbeddingVector::new).collect());
        }
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(GatewayError::InvalidRequest("cannot embed text without tokens".into()));
        }
        Ok(tokens.iter().map(|t| self.hashed_unit_vector("token", t)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llmgate::GenerationParams;

    fn req(prompt: &str, seed: u64) -> CompletionRequest {
        CompletionRequest::new(prompt, GenerationParams::recovery().with_seed(seed)).unwrap()
    }

    fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
        let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
        let na = a.values.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.values.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[tokio::test]
    async fn fixture_lookup_and_miss() {
        let mut gw = MockGateway::new();
        gw.add_completion("p", "42");
        assert_eq!(gw.complete(&req("p", 0)).await.unwrap(), "42");
        assert_eq!(gw.complete(&req("p", 0)).await.unwrap(), "42");
        let err = gw.complete(&req("q", 0)).await.unwrap_err();
        assert_eq!(err, GatewayError::FixtureMiss { prompt_hash: hash64_hex("q") });
    }

    #[tokio::test]
    async fn seeded_fixture_wins_over_wildcard() {
        let mut gw = MockGateway::new();
        gw.add_completion("p", "any");
        gw.add_seeded_completion("p", 7, "seven");
        assert_eq!(gw.complete(&req("p", 7)).await.unwrap(), "seven");
        assert_eq!(gw.complete(&req("p", 8)).await.unwrap(), "any");
    }

    #[tokio::test]
    async fn fixture_file_round_trip() {
        let lines = vec![
            FixtureLine::completion("a", "A"),
            FixtureLine::seeded_completion("b", 3, "B"),
            FixtureLine::TokenRows(TokenRowsFixture { text_hash: hash64_hex("x y"), rows: vec![vec![1.0, 0.0], vec![0.0, 1.0]] }),
        ];
        let text: String = lines.iter().map(|l| serde_json::to_string(l).unwrap() + "\n").collect();
        let gw = MockGateway::from_fixture_str(&text).unwrap();
        assert_eq!(gw.len(), 3);
        assert_eq!(gw.digest(), MockGateway::from_lines(lines.into_iter().rev()).digest());
        let rows = gw.token_embed("x y").await.unwrap();
        assert_eq!(rows[1].values, vec![0.0, 1.0]);
        assert!(MockGateway::from_fixture_str("{oops").is_err());
    }

    #[tokio::test]
    async fn embeddings_are_deterministic_unit_vectors() {
        let gw = MockGateway::new().with_dimension(64);
        let a = gw.sentence_embed("hello world").await.unwrap();
        assert_eq!(a, gw.sentence_embed("hello world").await.unwrap());
        assert_eq!(a.dimension(), 64);
        assert!((cosine(&a, &a) - 1.0).abs() < 1e-12);
        assert!(gw.sentence_embed("").await.is_err());
        assert!(gw.token_embed("").await.is_err());
        assert_eq!(gw.token_embed("the cat").await.unwrap().len(), 2);
        assert_eq!(gw.token_embed("the cat").await.unwrap(), gw.token_embed("the cat").await.unwrap());
    }

    #[tokio::test]
    async fn distinct_texts_have_cosine_below_one() {
        let gw = MockGateway::new().with_dimension(64);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let a = format!("text {}", rng.random::<u64>());
            let b = format!("text {}", rng.random::<u64>());
            if a == b {
                continue;
            }
            let c = cosine(&gw.sentence_embed(&a).await.unwrap(), &gw.sentence_embed(&b).await.unwrap());
            assert!(c < 1.0 - 1e-9, "{a} / {b}: {c}");
            assert!(c >= 0.0);
        }
    }
}
