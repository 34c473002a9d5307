//! Model backends: scripted fixture replay and a remote chat endpoint.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::message::AgentId;
use crate::remote::RemoteClient;

/// One model call. `turn` is the designer turn (or corpus item) index and
/// `call` counts calls to the same agent within that turn, both 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelRequest {
    pub agent: AgentId,
    pub turn: u32,
    pub call: u32,
    /// The designer text that started the turn.
    pub request: String,
    pub system: String,
    pub user: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelError {
    #[error("model unavailable: {message}")]
    Unavailable { message: String },
    #[error("fixture has no response for {agent} turn {turn} call {call}")]
    MissingFixture { agent: AgentId, turn: u32, call: u32 },
}

impl ModelError {
    pub fn unavailable(message: impl Into<String>) -> Self {
        ModelError::Unavailable { message: message.into() }
    }
}

pub trait ModelClient: Send + Sync {
    fn complete(&self, req: &ModelRequest) -> Result<String, ModelError>;

    fn backend_name(&self) -> &'static str;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub agent: AgentId,
    pub turn: u32,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FixtureError {
    #[error("fixture line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Replays recorded responses. The n-th call of an agent in a turn gets the
/// n-th record with that (agent, turn) key, in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptedClient {
    records: BTreeMap<(AgentId, u32), Vec<String>>,
}

impl ScriptedClient {
    pub fn new(records: impl IntoIterator<Item = FixtureRecord>) -> Self {
        let mut map: BTreeMap<(AgentId, u32), Vec<String>> = BTreeMap::new();
        for r in records {
            map.entry((r.agent, r.turn)).or_default().push(r.response);
        }
        ScriptedClient { records: map }
    }

    /// Parses record-per-line JSON. Blank lines are skipped.
    pub fn from_jsonl(text: &str) -> Result<Self, FixtureError> {
        Ok(ScriptedClient::new(parse_fixture(text)?))
    }

    pub fn load(path: &Path) -> Result<Self, FixtureError> {
        let text = std::fs::read_to_string(path).map_err(|e| FixtureError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        ScriptedClient::from_jsonl(&text)
    }

    pub fn len(&self) -> usize {
        self.records.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

pub fn parse_fixture(text: &str) -> Result<Vec<FixtureRecord>, FixtureError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: FixtureRecord = serde_json::from_str(line).map_err(|e| FixtureError::Line {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(r);
    }
    Ok(out)
}

pub fn render_fixture(records: &[FixtureRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("fixture record serializes") + "\n")
        .collect()
}

impl ModelClient for ScriptedClient {
    fn complete(&self, req: &ModelRequest) -> Result<String, ModelError> {
        self.records
            .get(&(req.agent, req.turn))
            .and_then(|v| v.get(req.call.checked_sub(1)? as usize))
            .cloned()
            .ok_or(ModelError::MissingFixture {
                agent: req.agent,
                turn: req.turn,
                call: req.call,
            })
    }

    fn backend_name(&self) -> &'static str {
        "scripted"
    }
}

/// Remote endpoint settings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub key: Option<String>,
    pub model: String,
    pub timeout: Duration,
    pub retries: u32,
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);
pub const DEFAULT_RETRIES: u32 = 2;
pub const DEFAULT_MODEL_NAME: &str = "default";

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            key: None,
            model: DEFAULT_MODEL_NAME.to_string(),
            timeout: DEFAULT_TIMEOUT,
            retries: DEFAULT_RETRIES,
        }
    }
}

/// Picks a backend from `FIXTURE_PATH` (scripted) or `MODEL_ENDPOINT`,
/// `MODEL_KEY`, `MODEL_NAME` (remote). A fixture wins when both are set.
pub fn client_from_env() -> Result<Option<Arc<dyn ModelClient>>, FixtureError> {
    client_from_vars(|k| std::env::var(k).ok().filter(|v| !v.is_empty()))
}

pub fn client_from_vars(var: impl Fn(&str) -> Option<String>) -> Result<Option<Arc<dyn ModelClient>>, FixtureError> {
    if let Some(path) = var("FIXTURE_PATH") {
        return Ok(Some(Arc::new(ScriptedClient::load(Path::new(&path))?)));
    }
    if let Some(endpoint) = var("MODEL_ENDPOINT") {
        let mut cfg = RemoteConfig::new(endpoint);
        cfg.key = var("MODEL_KEY");
        if let Some(m) = var("MODEL_NAME") {
            cfg.model = m;
        }
        return Ok(Some(Arc::new(RemoteClient::new(cfg))));
    }
    Ok(None)
}
