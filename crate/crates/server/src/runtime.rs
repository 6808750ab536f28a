//! Builds sessions from configuration: backend, memory, prompts, actions and
//! the simulated desktop.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cola_core::actions::ActionRegistry;
use cola_core::agents::{load_configs, AgentConfig, Agents};
use cola_core::clock::{Clock, LogicalClock, SystemClock};
use cola_core::env::{load_scenario, EnvironmentAdapter, ScenarioError, SimulatedDesktop};
use cola_core::gateway::{ChatBackend, Playbook, RemoteBackend, ScriptedBackend};
use cola_core::memory::{EmbeddingProvider, MemoryBank, RemoteEmbedder, StubEmbedder};
use cola_core::model::Role;
use cola_core::orchestrator::{EngineError, InteractionMode, Session, SessionStore};

use crate::config::{BackendProvider, ClockKind, EmbeddingProviderKind, ServiceConfig};

#[derive(Debug, thiserror::Error)]
pub enum RuntimeError {
    #[error("scenario {path}: {source}")]
    Scenario { path: PathBuf, source: ScenarioError },
    #[error("a scenario file is required")]
    NoScenario,
    #[error("playbook {path}: {detail}")]
    Playbook { path: PathBuf, detail: String },
    #[error("the scripted backend needs a playbook")]
    NoPlaybook,
    #[error("memory: {0}")]
    Memory(#[from] cola_core::memory::MemoryError),
    #[error("prompts: {0}")]
    Prompts(#[from] cola_core::agents::AgentError),
    #[error("action manifest: {0}")]
    Actions(#[from] cola_core::actions::RegistryError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

impl RuntimeError {
    /// Problems with what the caller supplied, as opposed to server faults.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            RuntimeError::Scenario { .. } | RuntimeError::NoScenario | RuntimeError::Playbook { .. } | RuntimeError::NoPlaybook
        ) || matches!(self, RuntimeError::Engine(EngineError::EmptyRequest))
    }
}

/// What a new session is built from.
#[derive(Debug, Clone)]
pub struct SessionSpec {
    pub task: String,
    pub mode: InteractionMode,
    pub budget: u32,
    pub scenario: Option<PathBuf>,
    pub playbook: Option<PathBuf>,
}

/// Shared, session-independent parts of the engine.
pub struct Runtime {
    config: ServiceConfig,
    memory: Arc<MemoryBank>,
    registry: Arc<ActionRegistry>,
    prompts: BTreeMap<Role, AgentConfig>,
    clock: Arc<dyn Clock>,
}

impl Runtime {
    pub fn new(config: ServiceConfig) -> Result<Self, RuntimeError> {
        let clock: Arc<dyn Clock> = match config.clock {
            ClockKind::System => Arc::new(SystemClock),
            ClockKind::Logical => Arc::new(LogicalClock::default()),
        };
        let embedder: Arc<dyn EmbeddingProvider> = match config.embedding {
            EmbeddingProviderKind::Stub => Arc::new(StubEmbedder),
            EmbeddingProviderKind::Remote => Arc::new(RemoteEmbedder::new(
                config.embedding_base_url.clone(),
                std::env::var(&config.embedding_api_key_env).ok(),
                config.embedding_model.clone(),
                config.embedding_dimension,
            )?),
        };
        let memory = Arc::new(MemoryBank::open(&config.memory_dir, embedder, clock.clone())?);
        let mut registry = ActionRegistry::with_builtins();
        if let Some(manifest) = &config.action_manifest {
            registry.load_manifest(manifest)?;
        }
        let prompts = load_configs(config.prompt_dir.as_deref())?;
        Ok(Self { config, memory, registry: Arc::new(registry), prompts, clock })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn memory(&self) -> &Arc<MemoryBank> {
        &self.memory
    }

    fn backend(&self, playbook: Option<&Path>) -> Result<Arc<dyn ChatBackend>, RuntimeError> {
        match (playbook, self.config.backend) {
            (Some(path), _) => {
                let pb = Playbook::load(path).map_err(|detail| RuntimeError::Playbook { path: path.to_path_buf(), detail })?;
                Ok(Arc::new(ScriptedBackend::new(pb)))
            }
            (None, BackendProvider::Remote) => Ok(Arc::new(
                RemoteBackend::new(self.config.base_url.clone(), self.config.api_key()).with_model(self.config.model.clone()),
            )),
            (None, BackendProvider::Scripted) => Err(RuntimeError::NoPlaybook),
        }
    }

    /// A fresh backend per session, so playbook positions never mix.
    pub fn agents(&self, playbook: Option<&Path>) -> Result<Arc<Agents>, RuntimeError> {
        let agents = Agents::new(self.backend(playbook)?, self.memory.clone(), self.registry.clone())
            .with_configs(self.prompts.clone())
            .with_model(self.config.model.clone())
            .with_max_repairs(self.config.max_repairs);
        Ok(Arc::new(agents))
    }

    pub fn environment(&self, scenario: Option<&Path>) -> Result<Box<dyn EnvironmentAdapter>, RuntimeError> {
        let path = scenario.ok_or(RuntimeError::NoScenario)?;
        let script = load_scenario(path).map_err(|source| RuntimeError::Scenario { path: path.to_path_buf(), source })?;
        Ok(Box::new(SimulatedDesktop::new(Arc::new(script))))
    }

    /// A new session, not persisted.
    pub fn start(&self, id: &str, spec: &SessionSpec) -> Result<Session, RuntimeError> {
        let env = self.environment(spec.scenario.as_deref())?;
        let agents = self.agents(spec.playbook.as_deref())?;
        Ok(Session::start(id, spec.task.clone(), spec.mode, spec.budget, env, agents, self.clock.clone())?)
    }

    /// A new session persisted under `sessions_dir`.
    pub fn start_persistent(&self, id: &str, spec: &SessionSpec) -> Result<Session, RuntimeError> {
        let session = self.start(id, spec)?;
        let store = SessionStore::create(&self.config.sessions_dir, id, absolute(&spec.scenario), absolute(&spec.playbook))?;
        Ok(session.with_store(store)?)
    }

    /// Rebuilds a session from its directory.
    pub fn recover(&self, dir: &Path) -> Result<Session, RuntimeError> {
        let (store, stored) = SessionStore::load(dir)?;
        let env = self.environment(stored.meta.scenario.as_deref())?;
        let agents = self.agents(stored.meta.playbook.as_deref())?;
        Ok(Session::recover(stored, store, env, agents, self.clock.clone())?)
    }
}

fn absolute(path: &Option<PathBuf>) -> Option<PathBuf> {
    path.as_ref().map(|p| std::path::absolute(p).unwrap_or_else(|_| p.clone()))
}
