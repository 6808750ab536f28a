//! Service configuration: a flat TOML file whose keys can each be overridden
//! by a `COLA_<KEY>` environment variable.

use std::path::{Path, PathBuf};

use cola_core::orchestrator::{InteractionMode, DEFAULT_BUDGET};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendProvider {
    /// Playbook-driven; every session must supply a playbook.
    Scripted,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingProviderKind {
    Stub,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockKind {
    System,
    /// Timestamps derived from record positions; makes logs byte-identical.
    Logical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub sessions_dir: PathBuf,
    pub memory_dir: PathBuf,
    pub prompt_dir: Option<PathBuf>,
    pub action_manifest: Option<PathBuf>,
    pub backend: BackendProvider,
    pub base_url: String,
    pub model: String,
    pub api_key_env: String,
    pub max_repairs: u32,
    pub embedding: EmbeddingProviderKind,
    pub embedding_base_url: String,
    pub embedding_model: String,
    pub embedding_api_key_env: String,
    pub embedding_dimension: usize,
    pub default_mode: InteractionMode,
    pub default_budget: u32,
    pub clock: ClockKind,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            sessions_dir: PathBuf::from("data/sessions"),
            memory_dir: PathBuf::from("data/memory"),
            prompt_dir: None,
            action_manifest: None,
            backend: BackendProvider::Scripted,
            base_url: "https://api.openai.com/v1".into(),
            model: cola_core::gateway::DEFAULT_MODEL.into(),
            api_key_env: "OPENAI_API_KEY".into(),
            max_repairs: cola_core::gateway::DEFAULT_MAX_REPAIRS,
            embedding: EmbeddingProviderKind::Stub,
            embedding_base_url: "https://api.openai.com/v1".into(),
            embedding_model: cola_core::memory::DEFAULT_EMBEDDING_MODEL.into(),
            embedding_api_key_env: "OPENAI_API_KEY".into(),
            embedding_dimension: cola_core::memory::DEFAULT_EMBEDDING_DIMENSION,
            default_mode: InteractionMode::Automatic,
            default_budget: DEFAULT_BUDGET,
            clock: ClockKind::System,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid value for {key}: {detail}")]
    Override { key: String, detail: String },
    #[error("cannot create {path}: {source}")]
    Directory { path: PathBuf, source: std::io::Error },
}

impl ServiceConfig {
    /// Defaults, then `path` (if any), then `COLA_*` overrides from `vars`.
    pub fn load<I>(path: Option<&Path>, vars: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.to_path_buf(), source })?;
                text.parse::<toml::Table>().map_err(|e| ConfigError::Parse(e.to_string()))?
            }
            None => toml::Table::new(),
        };
        let known = toml::Table::try_from(ServiceConfig::default()).expect("defaults serialize");
        for (name, value) in vars {
            let Some(key) = name.strip_prefix("COLA_").map(str::to_ascii_lowercase) else {
                continue;
            };
            if !known.contains_key(&key) && key != "prompt_dir" && key != "action_manifest" {
                continue;
            }
            table.insert(key.clone(), override_value(&key, &value, known.get(&key))?);
        }
        let config: ServiceConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        Ok(config)
    }

    /// Loads with the process environment.
    pub fn from_env(path: Option<&Path>) -> Result<Self, ConfigError> {
        Self::load(path, std::env::vars())
    }

    pub fn ensure_dirs(&self) -> Result<(), ConfigError> {
        for dir in [&self.sessions_dir, &self.memory_dir] {
            std::fs::create_dir_all(dir).map_err(|source| ConfigError::Directory { path: dir.clone(), source })?;
        }
        Ok(())
    }

    pub fn api_key(&self) -> Option<String> {
        std::env::var(&self.api_key_env).ok().filter(|k| !k.is_empty())
    }
}

/// Environment strings are typed after the default they replace.
fn override_value(key: &str, raw: &str, template: Option<&toml::Value>) -> Result<toml::Value, ConfigError> {
    let bad = |detail: String| ConfigError::Override { key: format!("COLA_{}", key.to_ascii_uppercase()), detail };
    Ok(match template {
        Some(toml::Value::Integer(_)) => toml::Value::Integer(raw.trim().parse().map_err(|e| bad(format!("{e}")))?),
        Some(toml::Value::Boolean(_)) => toml::Value::Boolean(raw.trim().parse().map_err(|e| bad(format!("{e}")))?),
        _ => toml::Value::String(raw.to_string()),
    })
}
