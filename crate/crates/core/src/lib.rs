//! Role-based multi-agent orchestration for desktop automation tasks.

pub mod actions;
pub mod agents;
pub mod clock;
pub mod env;
pub mod gateway;
pub mod memory;
pub mod model;
pub mod orchestrator;
