use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use super::{EmbeddingProvider, LongTermStore, MemoryError, MemoryRecord};
use crate::clock::Clock;
use crate::model::Role;

/// The long-term stores of every agent, one per role, never shared between
/// roles. Optionally mirrored to `{dir}/{role}.jsonl`.
pub struct MemoryBank {
    dir: Option<PathBuf>,
    embedder: Arc<dyn EmbeddingProvider>,
    clock: Arc<dyn Clock>,
    stores: RwLock<BTreeMap<Role, LongTermStore>>,
}

impl MemoryBank {
    pub fn in_memory(embedder: Arc<dyn EmbeddingProvider>, clock: Arc<dyn Clock>) -> Self {
        Self { dir: None, embedder, clock, stores: RwLock::new(BTreeMap::new()) }
    }

    /// Opens (creating if needed) a persistent bank under `dir`.
    pub fn open(dir: impl Into<PathBuf>, embedder: Arc<dyn EmbeddingProvider>, clock: Arc<dyn Clock>) -> Result<Self, MemoryError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        let mut stores = BTreeMap::new();
        for role in Role::ALL {
            let store = LongTermStore::load(&Self::path_for(&dir, role), role, embedder.dimension())?;
            stores.insert(role, store);
        }
        Ok(Self { dir: Some(dir), embedder, clock, stores: RwLock::new(stores) })
    }

    fn path_for(dir: &Path, role: Role) -> PathBuf {
        dir.join(format!("{}.jsonl", role.id()))
    }

    pub fn embedder(&self) -> &dyn EmbeddingProvider {
        self.embedder.as_ref()
    }

    pub fn insert(&self, role: Role, summary: &str, content: &str) -> Result<u64, MemoryError> {
        let mut stores = self.stores.write().expect("memory lock poisoned");
        let store = stores
            .entry(role)
            .or_insert_with(|| LongTermStore::new(role, self.embedder.dimension()));
        let created_at = self.clock.timestamp(store.len() as u64);
        let record = store.insert(summary, content, self.embedder.as_ref(), created_at)?;
        if let Some(dir) = &self.dir {
            LongTermStore::append_record(&Self::path_for(dir, role), record)?;
        }
        Ok(record.id)
    }

    pub fn retrieve(&self, role: Role, query: &str, n: usize) -> Result<Vec<MemoryRecord>, MemoryError> {
        let stores = self.stores.read().expect("memory lock poisoned");
        match stores.get(&role) {
            Some(store) => store.retrieve(query, n, self.embedder.as_ref()),
            None => Ok(Vec::new()),
        }
    }

    pub fn len(&self, role: Role) -> usize {
        let stores = self.stores.read().expect("memory lock poisoned");
        stores.get(&role).map_or(0, LongTermStore::len)
    }

    pub fn sizes(&self) -> BTreeMap<Role, usize> {
        Role::ALL.into_iter().map(|r| (r, self.len(r))).collect()
    }

    pub fn snapshot(&self, role: Role) -> Option<LongTermStore> {
        self.stores.read().expect("memory lock poisoned").get(&role).cloned()
    }
}
