//! A model stand-in that answers from corpus ground truth.

use std::collections::HashMap;

use layoutpilot_core::validate::{Payload, ResponseEnvelope, Status};

use super::corpus::{CorpusRecord, KindRecord, Label};
use crate::classify::RequestKind;
use crate::message::AgentId;
use crate::model::{ModelClient, ModelError, ModelRequest};

#[derive(Debug, Clone)]
struct Truth {
    kind: Option<RequestKind>,
    reply: Option<String>,
}

/// Classifier calls get the labeled kind, Generator calls get the
/// ground-truth envelope. Everything else is unavailable.
#[derive(Debug, Clone, Default)]
pub struct EchoOracle {
    by_text: HashMap<String, Truth>,
}

pub fn ground_truth_reply(r: &CorpusRecord) -> String {
    let payload = match r.label {
        Label::Valid => Payload {
            status: Status::Ok,
            commands: r.ground_truth_script.lines().map(str::to_string).collect(),
            notes: String::new(),
        },
        Label::Invalid => Payload {
            status: Status::InvalidRequest,
            commands: Vec::new(),
            notes: "the request cannot be carried out as written".into(),
        },
    };
    ResponseEnvelope {
        prose: "Here is the command script.".into(),
        payload,
    }
    .render()
}

impl EchoOracle {
    pub fn new(corpus: &[CorpusRecord]) -> Self {
        let by_text = corpus
            .iter()
            .map(|r| {
                (
                    r.text.clone(),
                    Truth {
                        kind: Some(RequestKind::Concrete),
                        reply: Some(ground_truth_reply(r)),
                    },
                )
            })
            .collect();
        EchoOracle { by_text }
    }

    pub fn with_kinds(mut self, records: &[KindRecord]) -> Self {
        for r in records {
            self.by_text
                .entry(r.text.clone())
                .or_insert(Truth { kind: None, reply: None })
                .kind = Some(r.kind);
        }
        self
    }
}

impl ModelClient for EchoOracle {
    fn complete(&self, req: &ModelRequest) -> Result<String, ModelError> {
        let truth = self
            .by_text
            .get(&req.request)
            .ok_or_else(|| ModelError::unavailable("request is not in the oracle corpus"))?;
        let answer = match req.agent {
            AgentId::Classifier => truth.kind.map(|k| k.to_string()),
            AgentId::Generator => truth.reply.clone(),
            _ => None,
        };
        answer.ok_or_else(|| ModelError::unavailable(format!("the oracle does not answer for {}", req.agent)))
    }

    fn backend_name(&self) -> &'static str {
        "echo-oracle"
    }
}
