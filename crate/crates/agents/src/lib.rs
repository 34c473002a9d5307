//! Natural-language front end for the layout engine: a chain of model-backed
//! agents that turns designer requests into validated command scripts, plus
//! the harness used to evaluate it in bulk.

pub mod case_study;
pub mod classify;
pub mod error;
pub mod eval;
pub mod knowledge;
pub mod message;
pub mod model;
pub mod pipeline;
pub mod prompt;
pub mod remote;
pub mod steps;

pub use classify::{heuristic_kind, RequestKind};
pub use error::{ErrorKind, PipelineError};
pub use knowledge::{KnowledgeChunk, KnowledgeSource, KnowledgeStore};
pub use message::{AgentId, AgentMessage};
pub use model::{client_from_env, ModelClient, ModelError, ModelRequest, ScriptedClient};
pub use pipeline::{run_pipeline, Session, TurnOutcome};
pub use steps::Agents;

