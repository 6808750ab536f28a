use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::MemoryError;

/// Turns text into a vector. Callers normalize, so providers may return any
/// non-zero vector of their declared dimension.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, MemoryError>;
}

pub const STUB_DIMENSION: usize = 64;

/// Deterministic bag-of-tokens embedding: each whitespace token (lowercased,
/// edge punctuation trimmed) is hashed into one of 64 buckets; the counts are
/// L2-normalized. Text without tokens maps to the first basis vector.
#[derive(Debug, Default, Clone, Copy)]
pub struct StubEmbedder;

impl StubEmbedder {
    pub fn bucket(token: &str) -> usize {
        (fnv1a(token.as_bytes()) % STUB_DIMENSION as u64) as usize
    }

    pub fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
        text.split_whitespace()
            .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
            .filter(|t| !t.is_empty())
    }
}

pub fn stub_embed(text: &str) -> Vec<f64> {
    let mut v = vec![0.0; STUB_DIMENSION];
    let mut any = false;
    for token in StubEmbedder::tokens(text) {
        v[StubEmbedder::bucket(&token)] += 1.0;
        any = true;
    }
    if !any {
        v[0] = 1.0;
        return v;
    }
    normalize(&v).expect("a non-empty token count is never zero")
}

impl EmbeddingProvider for StubEmbedder {
    fn dimension(&self) -> usize {
        STUB_DIMENSION
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, MemoryError> {
        Ok(stub_embed(text))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Unit vector in the direction of `v`, or `None` for a zero (or non-finite) vector.
pub fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    Some(v.iter().map(|x| x / norm).collect())
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// OpenAI-compatible `/embeddings` endpoint.
pub struct RemoteEmbedder {
    client: reqwest::blocking::Client,
    base_url: String,
    api_key: Option<String>,
    model: String,
    dimension: usize,
}

pub const DEFAULT_EMBEDDING_MODEL: &str = "text-embedding-3-large";
pub const DEFAULT_EMBEDDING_DIMENSION: usize = 3072;

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl RemoteEmbedder {
    pub fn new(
        base_url: impl Into<String>,
        api_key: Option<String>,
        model: impl Into<String>,
        dimension: usize,
    ) -> Result<Self, MemoryError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| MemoryError::EmbeddingFailure(e.to_string()))?;
        Ok(Self {
            client,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            model: model.into(),
            dimension,
        })
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, MemoryError> {
        let mut req = self
            .client
            .post(format!("{}/embeddings", self.base_url))
            .json(&json!({ "model": self.model, "input": text }));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| MemoryError::EmbeddingFailure(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(MemoryError::EmbeddingFailure(format!("embedding endpoint returned {}", resp.status())));
        }
        let body: EmbeddingResponse = resp.json().map_err(|e| MemoryError::EmbeddingFailure(e.to_string()))?;
        body.data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| MemoryError::EmbeddingFailure("empty embedding response".into()))
    }
}
