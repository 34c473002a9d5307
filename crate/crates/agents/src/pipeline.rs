//! Sessions and the per-turn multi-agent pipeline.

use std::sync::Arc;

use layoutpilot_core::layout::Layout;
use layoutpilot_core::netlist::Netlist;
use layoutpilot_core::script::{execute, parse_script, LogEntry};
use layoutpilot_core::validate::{validate_text, ResponseEnvelope, Status, ValidationReport};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::RequestKind;
use crate::error::{ErrorKind, PipelineError};
use crate::knowledge::NetlistContext;
use crate::message::AgentId;
use crate::steps::{
    adapt_with_model, analyze, classify, generate_commands, refine, Agents, PromptRecord,
    RefineDecision, Solution, TurnCalls,
};

/// Refine rounds allowed for one abstract request.
pub const MAX_REFINE_ROUNDS: u32 = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum Stage {
    #[default]
    Idle,
    AwaitingSelection {
        request: String,
        solutions: Vec<Solution>,
        rounds: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub turn: u32,
    pub sender: AgentId,
    pub recipient: AgentId,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub label: String,
    pub hash: String,
}

/// Where an executed script came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "via", rename_all = "snake_case")]
pub enum ScriptOrigin {
    Turn { turn: u32 },
    Commands,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedScript {
    pub label: String,
    pub origin: ScriptOrigin,
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub netlist: Arc<Netlist>,
    netlist_ctx: Arc<NetlistContext>,
    pub initial: Layout,
    pub layout: Layout,
    pub transcript: Vec<TranscriptEntry>,
    pub stage: Stage,
    pub turns: u32,
    pub snapshots: Vec<SnapshotRecord>,
    /// Snapshot documents by label, parallel to `snapshots`.
    pub documents: Vec<String>,
    pub scripts: Vec<AppliedScript>,
    pub prompt_log: Vec<PromptRecord>,
}

pub fn snapshot_label(n: usize) -> String {
    format!("S{n}")
}

impl Session {
    pub fn new(layout: Layout) -> Self {
        let netlist = layout.netlist_arc().clone();
        let mut s = Session {
            netlist_ctx: Arc::new(NetlistContext::of(&netlist)),
            netlist,
            initial: layout.clone(),
            layout,
            transcript: Vec::new(),
            stage: Stage::Idle,
            turns: 0,
            snapshots: Vec::new(),
            documents: Vec::new(),
            scripts: Vec::new(),
            prompt_log: Vec::new(),
        };
        s.record_snapshot();
        s
    }

    fn record_snapshot(&mut self) -> SnapshotRecord {
        let doc = self.layout.snapshot();
        let rec = SnapshotRecord {
            label: snapshot_label(self.snapshots.len() + 1),
            hash: layoutpilot_core::layout::snapshot_hash(&doc),
        };
        self.snapshots.push(rec.clone());
        self.documents.push(doc);
        rec
    }

    pub fn latest(&self) -> &SnapshotRecord {
        self.snapshots.last().expect("a session always has its initial snapshot")
    }

    pub fn document(&self, label: &str) -> Option<&str> {
        self.snapshots
            .iter()
            .position(|s| s.label == label)
            .map(|i| self.documents[i].as_str())
    }

    /// Executes `text` on the current layout as one unit and records a
    /// snapshot. An empty script changes nothing.
    fn commit_script(&mut self, text: &str, origin: ScriptOrigin) -> Result<Option<(SnapshotRecord, Vec<LogEntry>)>, CommandsError> {
        let script = parse_script(text).map_err(|e| CommandsError::Parse(e.to_string()))?;
        if script.is_empty() {
            return Ok(None);
        }
        let mut work = self.layout.clone();
        let log = execute(&mut work, &script).map_err(|e| CommandsError::Execution(e.to_string()))?;
        self.layout = work;
        let rec = self.record_snapshot();
        self.scripts.push(AppliedScript {
            label: rec.label.clone(),
            origin,
            text: text.to_string(),
        });
        Ok(Some((rec, log)))
    }

    /// Direct script path: parse, validate, execute. Rejected scripts leave
    /// the session unchanged.
    pub fn apply_commands(&mut self, text: &str) -> Result<CommandsOutcome, CommandsError> {
        let report = validate_text(text, &self.layout);
        if !report.is_clean() {
            return Err(CommandsError::Rejected(report));
        }
        let done = self.commit_script(text, ScriptOrigin::Commands)?;
        Ok(match done {
            None => CommandsOutcome {
                report,
                snapshot: None,
                log: Vec::new(),
            },
            Some((rec, log)) => CommandsOutcome {
                report,
                snapshot: Some(rec),
                log,
            },
        })
    }

    /// Re-executes a recorded script during recovery and checks it lands on
    /// the recorded snapshot.
    pub fn replay_script(&mut self, applied: &AppliedScript, expected_hash: &str) -> Result<(), CommandsError> {
        let done = self.commit_script(&applied.text, applied.origin)?;
        let Some((rec, _)) = done else {
            return Err(CommandsError::Replay("recorded script is empty".into()));
        };
        if rec.label != applied.label || rec.hash != expected_hash {
            return Err(CommandsError::Replay(format!(
                "{} replayed to {} but {} was recorded",
                rec.label, rec.hash, expected_hash
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CommandsOutcome {
    pub report: ValidationReport,
    pub snapshot: Option<SnapshotRecord>,
    pub log: Vec<LogEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CommandsError {
    #[error("script rejected by the validator")]
    Rejected(ValidationReport),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("execution failed: {0}")]
    Execution(String),
    #[error("replay mismatch: {0}")]
    Replay(String),
}

/// Everything one designer turn produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnOutcome {
    pub turn: u32,
    pub kind: Option<RequestKind>,
    pub to_designer: Vec<String>,
    pub solutions: Option<Vec<Solution>>,
    pub awaiting_selection: bool,
    pub envelope: Option<ResponseEnvelope>,
    pub script: Option<String>,
    pub report: Option<ValidationReport>,
    pub executed: bool,
    pub execution_error: Option<String>,
    pub snapshot: Option<SnapshotRecord>,
    pub transcript: Vec<TranscriptEntry>,
    pub stage: Stage,
}

struct Turn<'a> {
    s: &'a mut Session,
    calls: TurnCalls,
    out: TurnOutcome,
}

impl Turn<'_> {
    fn say(&mut self, sender: AgentId, recipient: AgentId, body: impl Into<String>) {
        let e = TranscriptEntry {
            turn: self.out.turn,
            sender,
            recipient,
            body: body.into(),
        };
        if recipient == AgentId::Designer {
            self.out.to_designer.push(e.body.clone());
        }
        self.s.transcript.push(e.clone());
        self.out.transcript.push(e);
    }

    fn generate_and_execute(&mut self, agents: &Agents, request: &str) -> Result<(), PipelineError> {
        let ctx = self.s.netlist_ctx.clone();
        let g = generate_commands(agents, &mut self.calls, &ctx, request, &self.s.layout)?;
        self.say(AgentId::Generator, AgentId::Designer, g.raw.clone());
        let clean = g.report.formatting.pass && g.report.is_clean();
        self.out.report = Some(g.report);
        let Some(env) = g.envelope else {
            return Ok(());
        };
        let script = env.script_text();
        let ok = env.payload.status == Status::Ok;
        self.out.envelope = Some(env);
        if !ok {
            return Ok(());
        }
        self.out.script = Some(script.clone());
        if !clean {
            return Ok(());
        }
        let turn = self.out.turn;
        match self.s.commit_script(&script, ScriptOrigin::Turn { turn }) {
            Ok(Some((rec, _))) => {
                self.out.executed = true;
                self.out.snapshot = Some(rec);
            }
            Ok(None) => {}
            Err(e) => self.out.execution_error = Some(e.to_string()),
        }
        Ok(())
    }

    fn present(&mut self, agents: &Agents, request: &str, solutions: Vec<Solution>, rounds: u32) -> Result<(), PipelineError> {
        let r = refine(agents, &mut self.calls, &solutions, None)?;
        for m in &r.messages {
            self.say(AgentId::Refiner, m.recipient, m.body.clone());
        }
        self.out.solutions = Some(solutions.clone());
        self.out.awaiting_selection = true;
        self.s.stage = Stage::AwaitingSelection {
            request: request.to_string(),
            solutions,
            rounds,
        };
        Ok(())
    }
}

/// Runs one designer turn. On error the session is unchanged, except that a
/// refine loop hitting [`MAX_REFINE_ROUNDS`] drops back to `Idle`.
pub fn run_pipeline(session: &mut Session, agents: &Agents, text: &str) -> Result<TurnOutcome, PipelineError> {
    if text.trim().is_empty() {
        return Err(PipelineError::new(AgentId::Designer, ErrorKind::EmptyRequest));
    }
    if let Stage::AwaitingSelection { rounds, .. } = &session.stage {
        if *rounds >= MAX_REFINE_ROUNDS {
            let rounds = *rounds;
            session.stage = Stage::Idle;
            return Err(PipelineError::new(AgentId::Refiner, ErrorKind::RefineLimit { rounds }));
        }
    }
    let mut work = session.clone();
    work.turns += 1;
    let turn = work.turns;
    let stage = work.stage.clone();
    let mut t = Turn {
        s: &mut work,
        calls: TurnCalls::new(turn, text),
        out: TurnOutcome {
            turn,
            kind: None,
            to_designer: Vec::new(),
            solutions: None,
            awaiting_selection: false,
            envelope: None,
            script: None,
            report: None,
            executed: false,
            execution_error: None,
            snapshot: None,
            transcript: Vec::new(),
            stage: Stage::Idle,
        },
    };
    match stage {
        Stage::Idle => {
            t.say(AgentId::Designer, AgentId::Classifier, text);
            let (kind, answer) = classify(agents, &mut t.calls, text)?;
            t.out.kind = Some(kind);
            let next = match kind {
                RequestKind::Concrete => AgentId::Generator,
                RequestKind::Abstract => AgentId::Analyzer,
            };
            t.say(AgentId::Classifier, next, answer.unwrap_or_else(|| kind.to_string()));
            match kind {
                RequestKind::Concrete => t.generate_and_execute(agents, text)?,
                RequestKind::Abstract => {
                    let ctx = t.s.netlist_ctx.clone();
                    let (solutions, raw) = analyze(agents, &mut t.calls, &ctx, text, None)?;
                    t.say(AgentId::Analyzer, AgentId::Refiner, raw);
                    t.present(agents, text, solutions, 1)?;
                }
            }
        }
        Stage::AwaitingSelection {
            request,
            solutions,
            rounds,
        } => {
            t.say(AgentId::Designer, AgentId::Refiner, text);
            let r = refine(agents, &mut t.calls, &solutions, Some(text))?;
            for m in &r.messages {
                t.say(AgentId::Refiner, m.recipient, m.body.clone());
            }
            match r.decision {
                RefineDecision::Selected { solution } => {
                    t.s.stage = Stage::Idle;
                    let netlist = t.s.netlist.clone();
                    let ctx = t.s.netlist_ctx.clone();
                    let (requests, raw) = adapt_with_model(agents, &mut t.calls, &netlist, &ctx, &solution)?;
                    t.say(AgentId::Adapter, AgentId::Generator, raw);
                    t.generate_and_execute(agents, &requests.join("\n"))?;
                }
                RefineDecision::Revise { feedback } => {
                    let ctx = t.s.netlist_ctx.clone();
                    let (solutions, raw) = analyze(agents, &mut t.calls, &ctx, &request, Some(&feedback))?;
                    t.say(AgentId::Analyzer, AgentId::Refiner, raw);
                    t.present(agents, &request, solutions, rounds + 1)?;
                }
                RefineDecision::Present => {
                    t.out.solutions = Some(solutions.clone());
                    t.out.awaiting_selection = true;
                    t.s.stage = Stage::AwaitingSelection {
                        request,
                        solutions,
                        rounds: rounds + 1,
                    };
                }
            }
        }
    }
    let Turn { calls, mut out, .. } = t;
    out.stage = work.stage.clone();
    work.prompt_log.extend(calls.prompts);
    *session = work;
    Ok(out)
}

/// Restores a turn from its recorded outcome without calling any model.
pub fn restore_turn(session: &mut Session, out: &TurnOutcome) -> Result<(), CommandsError> {
    session.turns = out.turn;
    session.transcript.extend(out.transcript.iter().cloned());
    if let (Some(script), Some(rec)) = (&out.script, &out.snapshot) {
        let applied = AppliedScript {
            label: rec.label.clone(),
            origin: ScriptOrigin::Turn { turn: out.turn },
            text: script.clone(),
        };
        session.replay_script(&applied, &rec.hash)?;
    }
    session.stage = out.stage.clone();
    Ok(())
}
