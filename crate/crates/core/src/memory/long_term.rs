use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::embedding::{cosine, normalize, EmbeddingProvider};
use super::MemoryError;
use crate::model::Role;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryRecord {
    pub id: u64,
    pub role: Role,
    pub summary: String,
    /// Unit length.
    pub embedding: Vec<f64>,
    pub content: String,
    pub created_at: DateTime<Utc>,
}

pub const SCORE_RESOLUTION: f64 = 1e-9;

fn quantize(score: f64) -> i64 {
    if score.is_nan() {
        return i64::MIN;
    }
    (score / SCORE_RESOLUTION).round() as i64
}

/// Append-only store of one agent's completed-task records.
#[derive(Debug, Clone, PartialEq)]
pub struct LongTermStore {
    owner_role: Role,
    dimension: usize,
    records: Vec<MemoryRecord>,
}

impl LongTermStore {
    pub fn new(owner_role: Role, dimension: usize) -> Self {
        Self { owner_role, dimension, records: Vec::new() }
    }

    pub fn owner_role(&self) -> Role {
        self.owner_role
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn records(&self) -> &[MemoryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn next_id(&self) -> u64 {
        self.records.last().map_or(0, |r| r.id + 1)
    }

    /// Embeds `summary` and appends a new record, returning its id.
    pub fn insert(
        &mut self,
        summary: &str,
        content: &str,
        provider: &dyn EmbeddingProvider,
        created_at: DateTime<Utc>,
    ) -> Result<&MemoryRecord, MemoryError> {
        if summary.trim().is_empty() {
            return Err(MemoryError::EmptySummary);
        }
        let embedding = self.embed_checked(summary, provider)?;
        let record = MemoryRecord {
            id: self.next_id(),
            role: self.owner_role,
            summary: summary.to_string(),
            embedding,
            content: content.to_string(),
            created_at,
        };
        self.records.push(record);
        Ok(self.records.last().unwrap())
    }

    /// Top-`n` records by cosine similarity to `query`, best first; equal
    /// scores favor the older (lower id) record. Scores are compared at
    /// [`SCORE_RESOLUTION`] so rounding noise cannot split a tie. `n == 0`
    /// returns nothing.
    pub fn retrieve(
        &self,
        query: &str,
        n: usize,
        provider: &dyn EmbeddingProvider,
    ) -> Result<Vec<MemoryRecord>, MemoryError> {
        if n == 0 || self.records.is_empty() {
            return Ok(Vec::new());
        }
        let q = self.embed_checked(query, provider)?;
        let mut scored: Vec<(i64, &MemoryRecord)> =
            self.records.iter().map(|r| (quantize(cosine(&q, &r.embedding)), r)).collect();
        scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.id.cmp(&b.1.id)));
        Ok(scored.into_iter().take(n).map(|(_, r)| r.clone()).collect())
    }

    fn embed_checked(&self, text: &str, provider: &dyn EmbeddingProvider) -> Result<Vec<f64>, MemoryError> {
        let raw = provider.embed(text)?;
        if raw.len() != self.dimension {
            return Err(MemoryError::DimensionMismatch { expected: self.dimension, got: raw.len() });
        }
        normalize(&raw).ok_or_else(|| MemoryError::EmbeddingFailure("provider returned a zero vector".into()))
    }

    /// Loads a JSONL store. A missing file yields an empty store.
    pub fn load(path: &Path, owner_role: Role, dimension: usize) -> Result<Self, MemoryError> {
        let mut store = Self::new(owner_role, dimension);
        let file = match File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(store),
            Err(e) => return Err(e.into()),
        };
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: MemoryRecord = serde_json::from_str(&line)
                .map_err(|e| MemoryError::Corrupt(format!("{}:{}: {e}", path.display(), i + 1)))?;
            if record.embedding.len() != dimension {
                return Err(MemoryError::DimensionMismatch { expected: dimension, got: record.embedding.len() });
            }
            if record.id < store.next_id() {
                return Err(MemoryError::Corrupt(format!("{}:{}: id {} out of order", path.display(), i + 1, record.id)));
            }
            store.records.push(record);
        }
        Ok(store)
    }

    pub fn append_record(path: &Path, record: &MemoryRecord) -> Result<(), MemoryError> {
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        let line = serde_json::to_string(record).map_err(|e| MemoryError::Corrupt(e.to_string()))?;
        writeln!(file, "{line}")?;
        Ok(())
    }
}
