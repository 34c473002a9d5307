//! The individual agent steps and the call bookkeeping they share.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use layoutpilot_core::layout::{format_placement_text, Layout};
use layoutpilot_core::netlist::{DeviceKind, Netlist};
use layoutpilot_core::script::COMMAND_NAMES;
use layoutpilot_core::validate::{evaluate_response, ResponseEnvelope, ValidationReport};
use serde::{Deserialize, Serialize};

use crate::classify::{heuristic_kind, parse_kind_answer, RequestKind};
use crate::error::{ErrorKind, PipelineError};
use crate::knowledge::{KnowledgeStore, NetlistContext};
use crate::message::{route_message, AgentId, AgentMessage};
use crate::model::{ModelClient, ModelError, ModelRequest};
use crate::prompt::{assemble_prompt, merged_prompt, Prompt, PromptContext, COMMAND_REFERENCE};

/// Knowledge chunks handed to the Analyzer per call.
pub const DEFAULT_KNOWLEDGE_K: usize = 4;

/// Backend, knowledge and policy shared by every step.
#[derive(Clone)]
pub struct Agents {
    pub client: Option<Arc<dyn ModelClient>>,
    pub knowledge: Arc<KnowledgeStore>,
    pub knowledge_k: usize,
    /// Use the keyword classifier when no model is configured or its answer
    /// is unreadable.
    pub fallback: bool,
}

impl Agents {
    pub fn new(client: Option<Arc<dyn ModelClient>>) -> Self {
        Agents {
            client,
            knowledge: Arc::new(KnowledgeStore::builtin()),
            knowledge_k: DEFAULT_KNOWLEDGE_K,
            fallback: true,
        }
    }

    pub fn with_knowledge(mut self, store: KnowledgeStore) -> Self {
        self.knowledge = Arc::new(store);
        self
    }

    fn call(&self, calls: &mut TurnCalls, prompt: Prompt, user: String) -> Result<String, PipelineError> {
        let agent = prompt.agent;
        let client = self
            .client
            .as_ref()
            .ok_or_else(|| PipelineError::new(agent, ErrorKind::Model(ModelError::unavailable("no model backend configured"))))?;
        let call = calls.next_call(agent);
        let req = ModelRequest {
            agent,
            turn: calls.turn,
            call,
            request: calls.request.clone(),
            system: prompt.render(),
            user,
        };
        calls.prompts.push(PromptRecord {
            turn: calls.turn,
            call,
            prompt,
        });
        client
            .complete(&req)
            .map_err(|e| PipelineError::new(agent, ErrorKind::Model(e)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub turn: u32,
    pub call: u32,
    pub prompt: Prompt,
}

/// Per-turn call counters and the prompts sent so far.
#[derive(Debug, Clone)]
pub struct TurnCalls {
    pub turn: u32,
    pub request: String,
    counters: BTreeMap<AgentId, u32>,
    pub prompts: Vec<PromptRecord>,
}

impl TurnCalls {
    pub fn new(turn: u32, request: &str) -> Self {
        TurnCalls {
            turn,
            request: request.to_string(),
            counters: BTreeMap::new(),
            prompts: Vec::new(),
        }
    }

    fn next_call(&mut self, agent: AgentId) -> u32 {
        let c = self.counters.entry(agent).or_insert(0);
        *c += 1;
        *c
    }
}

fn prompt_for(agent: AgentId, ctx: &PromptContext, agents: &Agents, query: Option<&str>) -> Result<Prompt, PipelineError> {
    let chunks = match query {
        Some(q) => agents.knowledge.retrieve(q, agents.knowledge_k),
        None => Vec::new(),
    };
    assemble_prompt(agent, ctx, &chunks).map_err(|e| PipelineError::new(agent, ErrorKind::Prompt(e)))
}

/// Classifier step. Returns the kind and the raw answer, if a model gave one.
pub fn classify(agents: &Agents, calls: &mut TurnCalls, text: &str) -> Result<(RequestKind, Option<String>), PipelineError> {
    if agents.client.is_none() {
        if agents.fallback {
            return Ok((heuristic_kind(text), None));
        }
        return Err(PipelineError::new(
            AgentId::Classifier,
            ErrorKind::Model(ModelError::unavailable("no model backend and fallback disabled")),
        ));
    }
    let ctx = PromptContext::from(AgentId::Designer).slot("request", text);
    let prompt = prompt_for(AgentId::Classifier, &ctx, agents, None)?;
    let answer = agents.call(calls, prompt, text.to_string())?;
    match parse_kind_answer(&answer) {
        Some(k) => Ok((k, Some(answer))),
        None if agents.fallback => Ok((heuristic_kind(text), Some(answer))),
        None => Err(PipelineError::new(AgentId::Classifier, ErrorKind::UnparseableAnswer { answer })),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    pub index: u32,
    pub title: String,
    pub text: String,
    /// Layout commands the solution names, in order of mention.
    pub commands: Vec<String>,
}

fn enumerated(line: &str) -> Option<(u32, &str)> {
    let t = line.trim_start();
    let digits = t.find(|c: char| !c.is_ascii_digit())?;
    if digits == 0 {
        return None;
    }
    let rest = &t[digits..];
    let rest = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'))?;
    if !rest.starts_with(char::is_whitespace) {
        return None;
    }
    Some((t[..digits].parse().ok()?, rest.trim()))
}

fn plain(text: &str) -> String {
    text.replace("**", "").replace('`', "")
}

fn solution_of(index: u32, text: String) -> Solution {
    let clean = plain(&text);
    let cut = [" with ", ":", ". "]
        .iter()
        .filter_map(|p| clean.find(p))
        .min()
        .unwrap_or(clean.len());
    let title = clean[..cut].trim().trim_end_matches('.').to_string();
    let mut commands: Vec<String> = Vec::new();
    for w in clean.split(|c: char| !c.is_ascii_alphanumeric()) {
        if COMMAND_NAMES.contains(&w) && !commands.iter().any(|c| c == w) {
            commands.push(w.to_string());
        }
    }
    Solution {
        index,
        title,
        text: clean,
        commands,
    }
}

/// Reads an enumerated list. Indented lines continue the previous item.
pub fn parse_solutions(text: &str) -> Result<Vec<Solution>, PipelineError> {
    let mut items: Vec<(u32, String)> = Vec::new();
    for line in text.lines() {
        if let Some((n, body)) = enumerated(line) {
            if !body.is_empty() {
                items.push((n, body.to_string()));
            }
        } else if line.starts_with(char::is_whitespace) && !line.trim().is_empty() {
            if let Some(last) = items.last_mut() {
                last.1.push(' ');
                last.1.push_str(line.trim());
            }
        }
    }
    if items.is_empty() {
        return Err(PipelineError::new(AgentId::Analyzer, ErrorKind::UnparseableSolutionList));
    }
    Ok(items.into_iter().map(|(n, t)| solution_of(n, t)).collect())
}

pub fn render_solutions(solutions: &[Solution]) -> String {
    solutions
        .iter()
        .map(|s| format!("{}. {}", s.index, s.text))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Analyzer step: retrieval, then an enumerated solution list.
pub fn analyze(
    agents: &Agents,
    calls: &mut TurnCalls,
    netlist: &NetlistContext,
    request: &str,
    feedback: Option<&str>,
) -> Result<(Vec<Solution>, String), PipelineError> {
    let query = match feedback {
        Some(f) => format!("{request} {f}"),
        None => request.to_string(),
    };
    let ctx = PromptContext::from(if feedback.is_some() {
        AgentId::Refiner
    } else {
        AgentId::Classifier
    })
    .slot("request", request)
    .slot("netlist", netlist.prompt_text(&query, agents.knowledge_k))
    .slot("feedback", feedback.unwrap_or("none"));
    let prompt = prompt_for(AgentId::Analyzer, &ctx, agents, Some(&query))?;
    let raw = agents.call(calls, prompt, query)?;
    Ok((parse_solutions(&raw)?, raw))
}

/// What the Refiner decided to do with a designer reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefineDecision {
    /// Pipeline A, or a Pipeline B reply that only talks to the designer.
    Present,
    Selected { solution: String },
    Revise { feedback: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefineOutcome {
    pub messages: Vec<AgentMessage>,
    pub decision: RefineDecision,
    pub raw: String,
}

impl RefineOutcome {
    pub fn to_designer(&self) -> Vec<String> {
        self.messages
            .iter()
            .filter(|m| m.recipient == AgentId::Designer)
            .map(|m| m.body.clone())
            .collect()
    }
}

fn unexpected(message: String) -> PipelineError {
    PipelineError::new(AgentId::Refiner, ErrorKind::UnexpectedRoute { message })
}

/// Refiner step. `designer_feedback` selects Pipeline B; otherwise the
/// solutions came from the Analyzer and Pipeline A applies.
pub fn refine(
    agents: &Agents,
    calls: &mut TurnCalls,
    solutions: &[Solution],
    designer_feedback: Option<&str>,
) -> Result<RefineOutcome, PipelineError> {
    let source = if designer_feedback.is_some() {
        AgentId::Designer
    } else {
        AgentId::Analyzer
    };
    let mut ctx = PromptContext::from(source).slot("high_level_solutions", render_solutions(solutions));
    if let Some(f) = designer_feedback {
        ctx = ctx.slot("designer_feedback", f);
    }
    let prompt = prompt_for(AgentId::Refiner, &ctx, agents, None)?;
    let user = designer_feedback.map(str::to_string).unwrap_or_else(|| render_solutions(solutions));
    let raw = agents.call(calls, prompt, user)?;
    let messages = route_message(AgentId::Refiner, &raw).map_err(|e| PipelineError::new(AgentId::Refiner, ErrorKind::Routing(e)))?;
    let mut selected = None;
    let mut revise = None;
    for m in &messages {
        match m.recipient {
            AgentId::Designer => {}
            AgentId::Adapter if designer_feedback.is_some() => selected = Some(m.body.clone()),
            AgentId::Analyzer if designer_feedback.is_some() => revise = Some(m.body.clone()),
            other => return Err(unexpected(format!("Refiner cannot address {other} here"))),
        }
    }
    let decision = match (selected, revise) {
        (Some(_), Some(_)) => return Err(unexpected("reply addresses both Adapter and Analyzer".into())),
        (Some(solution), None) => RefineDecision::Selected { solution },
        (None, Some(feedback)) => RefineDecision::Revise { feedback },
        (None, None) => {
            if !messages.iter().any(|m| m.recipient == AgentId::Designer) {
                return Err(unexpected("reply has no message for the Designer".into()));
            }
            RefineDecision::Present
        }
    };
    Ok(RefineOutcome { messages, decision, raw })
}

fn kind_groups(netlist: &Netlist, kind: DeviceKind) -> Vec<Vec<String>> {
    netlist.find_matched_groups(kind)
}

fn supply_nets(netlist: &Netlist) -> Vec<String> {
    netlist
        .nets
        .keys()
        .filter(|n| {
            let l = n.to_ascii_lowercase();
            l.contains("vdd") || l.contains("gnd") || l.contains("vss")
        })
        .cloned()
        .collect()
}

fn passive_requests(groups: &[Vec<String>], out: &mut Vec<String>) {
    for g in groups {
        if let [a, b] = g.as_slice() {
            out.push(format!("add symmetry between {a} and {b}"));
        } else {
            out.push(format!("place {} together in one array", g.join(" ")));
        }
    }
}

/// Grounds a chosen solution in the netlist: which devices and nets the
/// solution should touch, as concrete request sentences.
pub fn adapt(solution: &str, netlist: &Netlist) -> Result<Vec<String>, PipelineError> {
    let fail = |m: &str| PipelineError::grounding(AgentId::Adapter, m);
    let t = solution.to_ascii_lowercase();
    let has = |words: &[&str]| words.iter().any(|w| t.contains(w));
    let pairs = netlist.find_differential_pairs();
    let mut out = Vec::new();
    let mut themed = false;
    let caps = has(&["capacitor"]);
    let res = has(&["resistor"]);
    if caps {
        themed = true;
        let g = kind_groups(netlist, DeviceKind::Capacitor);
        if g.is_empty() {
            return Err(fail("no matched capacitors in the netlist"));
        }
        passive_requests(&g, &mut out);
    }
    if res {
        themed = true;
        let g = kind_groups(netlist, DeviceKind::Resistor);
        if g.is_empty() {
            return Err(fail("no matched resistors in the netlist"));
        }
        passive_requests(&g, &mut out);
    }
    let need_pairs = |out: &mut Vec<String>, f: &dyn Fn(&layoutpilot_core::netlist::DiffPair) -> String| {
        if pairs.is_empty() {
            return Err(fail("no differential pairs in the netlist"));
        }
        out.extend(pairs.iter().map(f));
        Ok(())
    };
    if !caps && !res && has(&["symmetr", "symadd"]) {
        themed = true;
        need_pairs(&mut out, &|p| format!("add symmetry between {} and {}", p.a, p.b))?;
    }
    if !caps && !res && has(&["matching", "match ", "deviceswap", "devicemove", "array"]) {
        themed = true;
        need_pairs(&mut out, &|p| format!("place {} and {} side by side in one array", p.a, p.b))?;
    }
    if has(&["parasitic", "wirewidth", "width", "resistance"]) {
        themed = true;
        let nets = supply_nets(netlist);
        if nets.is_empty() {
            return Err(fail("no supply nets in the netlist"));
        }
        out.extend(nets.iter().map(|n| format!("widen the wires of {n}")));
    }
    if has(&["crosstalk", "wirespacing", "spacing", "coupling"]) {
        themed = true;
        need_pairs(&mut out, &|p| {
            let (ga, gb) = gate_nets(netlist, p);
            format!("keep the wires of {ga} and {gb} apart")
        })?;
    }
    if has(&["routing", "netpriority", "priority", "critical", "nettopology"]) {
        themed = true;
        let mut nets = BTreeSet::new();
        for p in &pairs {
            let (ga, gb) = gate_nets(netlist, p);
            nets.extend([ga, gb]);
        }
        if nets.is_empty() {
            return Err(fail("no critical nets found"));
        }
        out.extend(nets.iter().map(|n| format!("give {n} a higher routing priority")));
    }
    if !themed {
        return Err(fail("the solution names no layout technique the adapter knows"));
    }
    let mut seen = BTreeSet::new();
    out.retain(|r| seen.insert(r.clone()));
    Ok(out)
}

fn gate_nets(netlist: &Netlist, p: &layoutpilot_core::netlist::DiffPair) -> (String, String) {
    let gate = |d: &str| netlist.device(d).map(|d| d.terminals[1].clone()).unwrap_or_default();
    (gate(&p.a), gate(&p.b))
}

/// Names in a request that look like circuit identifiers but are neither a
/// device nor a net.
pub fn unknown_names(request: &str, netlist: &Netlist) -> Vec<String> {
    request
        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|w| w.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) && w.chars().any(|c| c.is_ascii_digit()))
        .filter(|w| !(w.starts_with("wire") && w[4..].chars().all(|c| c.is_ascii_digit())))
        .filter(|w| netlist.device(w).is_none() && !netlist.has_net(w))
        .map(str::to_string)
        .collect()
}

fn request_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| match enumerated(l) {
            Some((_, body)) => body.to_string(),
            None => l.trim().trim_start_matches(['-', '*']).trim().to_string(),
        })
        .filter(|l| !l.is_empty())
        .collect()
}

/// Adapter step: deterministic grounding, then the model phrases the final
/// concrete requests, which must only name circuit objects.
pub fn adapt_with_model(
    agents: &Agents,
    calls: &mut TurnCalls,
    netlist: &Netlist,
    netlist_ctx: &NetlistContext,
    solution: &str,
) -> Result<(Vec<String>, String), PipelineError> {
    let grounded = adapt(solution, netlist)?;
    let ctx = PromptContext::from(AgentId::Refiner)
        .slot("solution", solution)
        .slot("grounding", grounded.join("\n"))
        .slot("netlist", netlist_ctx.prompt_text(solution, agents.knowledge_k));
    let prompt = prompt_for(AgentId::Adapter, &ctx, agents, None)?;
    let raw = agents.call(calls, prompt, solution.to_string())?;
    let requests = request_lines(&raw);
    if requests.is_empty() {
        return Err(PipelineError::grounding(AgentId::Adapter, "adapter produced no requests"));
    }
    let unknown: Vec<String> = requests.iter().flat_map(|r| unknown_names(r, netlist)).collect();
    if !unknown.is_empty() {
        return Err(PipelineError::grounding(
            AgentId::Adapter,
            format!("requests name unknown objects: {}", unknown.join(", ")),
        ));
    }
    Ok((requests, raw))
}

/// Placement text plus routed wire ids, as the Generator sees the layout.
pub fn layout_summary(l: &Layout) -> String {
    let mut s = format_placement_text(l);
    for p in &l.sym_pairs {
        s.push_str(&format!("# symmetry {} {} axis2={}\n", p.a, p.b, p.axis2));
    }
    for g in l.array_groups.values() {
        s.push_str(&format!("# array {} {}\n", g.id, g.members.join(" ")));
    }
    for r in l.nets.values().filter(|r| !r.wires.is_empty()) {
        let ids: Vec<String> = r.wires.iter().map(|w| format!("wire{}", w.id)).collect();
        s.push_str(&format!("# wires {} {}\n", r.net, ids.join(" ")));
    }
    s
}

/// A Generator reply and its sanity-check report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Generated {
    pub raw: String,
    pub envelope: Option<ResponseEnvelope>,
    pub report: ValidationReport,
}

fn generation_context(agents: &Agents, netlist_ctx: &NetlistContext, request: &str, layout: &Layout) -> PromptContext {
    PromptContext::from(AgentId::Designer)
        .slot("request", request)
        .slot("netlist", netlist_ctx.prompt_text(request, agents.knowledge_k))
        .slot("layout", layout_summary(layout))
        .slot("commands", COMMAND_REFERENCE)
}

pub fn generate_commands(
    agents: &Agents,
    calls: &mut TurnCalls,
    netlist_ctx: &NetlistContext,
    request: &str,
    layout: &Layout,
) -> Result<Generated, PipelineError> {
    let ctx = generation_context(agents, netlist_ctx, request, layout);
    let prompt = prompt_for(AgentId::Generator, &ctx, agents, None)?;
    let raw = agents.call(calls, prompt, request.to_string())?;
    let (envelope, report) = evaluate_response(&raw, None, layout);
    Ok(Generated { raw, envelope, report })
}

/// Generation through one merged prompt instead of the agent chain.
pub fn generate_single_agent(
    agents: &Agents,
    calls: &mut TurnCalls,
    netlist_ctx: &NetlistContext,
    request: &str,
    layout: &Layout,
) -> Result<Generated, PipelineError> {
    let ctx = generation_context(agents, netlist_ctx, request, layout);
    let chunks = agents.knowledge.retrieve(request, agents.knowledge_k);
    let prompt = merged_prompt(&ctx, &chunks).map_err(|e| PipelineError::new(AgentId::Generator, ErrorKind::Prompt(e)))?;
    let raw = agents.call(calls, prompt, request.to_string())?;
    let (envelope, report) = evaluate_response(&raw, None, layout);
    Ok(Generated { raw, envelope, report })
}
