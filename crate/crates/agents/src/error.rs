use serde::Serialize;
use thiserror::Error;

use crate::message::{AgentId, RoutingError};
use crate::model::ModelError;
use crate::prompt::PromptError;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorKind {
    #[error(transparent)]
    Model(ModelError),
    #[error(transparent)]
    Prompt(PromptError),
    #[error(transparent)]
    Routing(RoutingError),
    #[error("no enumerated solution list in the reply")]
    UnparseableSolutionList,
    #[error("cannot read a classification from `{answer}`")]
    UnparseableAnswer { answer: String },
    #[error("unexpected routing: {message}")]
    UnexpectedRoute { message: String },
    #[error("grounding failed: {message}")]
    GroundingFailure { message: String },
    #[error("refine loop stopped after {rounds} rounds")]
    RefineLimit { rounds: u32 },
    #[error("empty request")]
    EmptyRequest,
}

/// A pipeline failure and the agent it came from.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("{}{kind}", agent.map(|a| format!("{a}: ")).unwrap_or_default())]
pub struct PipelineError {
    pub agent: Option<AgentId>,
    pub kind: ErrorKind,
}

impl PipelineError {
    pub fn new(agent: impl Into<Option<AgentId>>, kind: ErrorKind) -> Self {
        PipelineError {
            agent: agent.into(),
            kind,
        }
    }

    pub fn grounding(agent: AgentId, message: impl Into<String>) -> Self {
        PipelineError::new(
            agent,
            ErrorKind::GroundingFailure {
                message: message.into(),
            },
        )
    }

    pub fn is_model_unavailable(&self) -> bool {
        matches!(self.kind, ErrorKind::Model(_))
    }
}
