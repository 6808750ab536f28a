//! Per-agent memory: an embedding-indexed long-term store queried by cosine
//! similarity, and a short-term window over the agent's recent responses.

mod bank;
mod embedding;
mod long_term;
mod short_term;

pub use bank::MemoryBank;
pub use embedding::{
    cosine, normalize, stub_embed, EmbeddingProvider, RemoteEmbedder, StubEmbedder, DEFAULT_EMBEDDING_DIMENSION,
    DEFAULT_EMBEDDING_MODEL, STUB_DIMENSION,
};
pub use long_term::{LongTermStore, MemoryRecord};
pub use short_term::{ShortTermEntry, ShortTermWindow};

#[derive(Debug, thiserror::Error)]
pub enum MemoryError {
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding failed: {0}")]
    EmbeddingFailure(String),
    #[error("memory summary must not be empty")]
    EmptySummary,
    #[error("short-term entry for step {step} arrives after step {last}")]
    OutOfOrder { last: u64, step: u64 },
    #[error("corrupt memory file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
