//! Operational shell around the engine: configuration, the session service
//! (HTTP plus WebSocket) and the batch CLI.

pub mod cli;
pub mod config;
pub mod driver;
pub mod runtime;
pub mod service;
pub mod wire;

pub use config::ServiceConfig;
pub use runtime::{Runtime, RuntimeError, SessionSpec};
pub use service::{router, App};
