//! Seven-section prompt templates and slot filling.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::KnowledgeChunk;
use crate::message::AgentId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SectionKind {
    RolePlay,
    WorkflowOverview,
    TaskDescription,
    Pipeline,
    InformationVerification,
    InteractionGuideline,
    ExternalKnowledge,
}

impl SectionKind {
    pub const ORDER: [SectionKind; 7] = [
        SectionKind::RolePlay,
        SectionKind::WorkflowOverview,
        SectionKind::TaskDescription,
        SectionKind::Pipeline,
        SectionKind::InformationVerification,
        SectionKind::InteractionGuideline,
        SectionKind::ExternalKnowledge,
    ];

    pub fn heading(self) -> &'static str {
        match self {
            SectionKind::RolePlay => "I. Role Play",
            SectionKind::WorkflowOverview => "II. Workflow Overview",
            SectionKind::TaskDescription => "III. Task Description",
            SectionKind::Pipeline => "IV. Pipeline",
            SectionKind::InformationVerification => "V. Information Verification",
            SectionKind::InteractionGuideline => "VI. Interaction Guideline",
            SectionKind::ExternalKnowledge => "VII. External Knowledge",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub kind: SectionKind,
    pub text: String,
}

/// An assembled system prompt. Always holds the seven sections in
/// [`SectionKind::ORDER`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub agent: AgentId,
    sections: Vec<Section>,
}

impl Prompt {
    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn section(&self, kind: SectionKind) -> &str {
        &self.sections[kind as usize].text
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.sections {
            out.push_str("## ");
            out.push_str(s.kind.heading());
            out.push('\n');
            out.push_str(s.text.trim_end());
            out.push_str("\n\n");
        }
        out
    }
}

impl fmt::Display for Prompt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PromptError {
    #[error("no prompt template for {agent}")]
    NoTemplate { agent: AgentId },
    #[error("missing slot `{name}`")]
    MissingSlot { name: String },
    #[error("{agent} cannot take input from {source_agent:?}")]
    UnexpectedSource {
        agent: AgentId,
        source_agent: Option<AgentId>,
    },
}

/// What the prompt is being built for: who sent the input, and slot values.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PromptContext {
    pub source: Option<AgentId>,
    pub slots: BTreeMap<String, String>,
}

impl PromptContext {
    pub fn from(source: AgentId) -> Self {
        PromptContext {
            source: Some(source),
            slots: BTreeMap::new(),
        }
    }

    pub fn slot(mut self, name: &str, value: impl Into<String>) -> Self {
        self.slots.insert(name.to_string(), value.into());
        self
    }
}

struct Template {
    role: &'static str,
    task: &'static str,
    pipeline: &'static str,
    verification: &'static str,
    interaction: &'static str,
}

const WORKFLOW: &str = "\
The assistant team edits analog layouts through a fixed command language. A \
Classifier sorts each designer request into concrete or abstract. Concrete \
requests go straight to the Generator, which writes commands. Abstract requests \
go to the Analyzer, which studies the circuit and proposes high-level \
solutions. The Refiner shows those solutions to the designer and collects a \
choice or corrections. The Adapter turns a chosen solution into concrete \
requests for the Generator. Every generated script is checked by a rule \
validator before it touches the layout.";

const CLASSIFIER: Template = Template {
    role: "You triage layout requests for an analog layout assistant.",
    task: "\
Decide whether the request below is concrete or abstract.
A concrete request names the edit to perform: which devices, nets, wires or \
numbers are involved, or which layout command to use.
An abstract request states a goal (better CMRR, less offset, lower parasitics) \
and leaves the edits to be worked out.

Request:
{request}",
    pipeline: "Read the request once, look for explicit edits, then answer.",
    verification: "Do not guess device names. Judge only what the text says.",
    interaction: "Answer with exactly one word: Concrete or Abstract.",
};

const ANALYZER: Template = Template {
    role: "You are an analog layout specialist who diagnoses circuits before anyone edits them.",
    task: "\
Study the designer request and the circuit, then propose high-level solutions.
Each solution is one numbered line that starts with a short title and names \
the layout commands it would rely on, for example `3. Balance the loads with \
deviceSwap`.

Request:
{request}

Circuit:
{netlist}

Earlier feedback from the designer:
{feedback}",
    pipeline: "\
1. Identify the circuit blocks and their sensitive devices.
2. Check the reference material for techniques that match the request.
3. Write between two and six numbered solutions, most useful first.",
    verification: "Only cite devices and nets that appear in the circuit listing.",
    interaction: "Use plain numbered lines. Do not write command scripts here.",
};

const REFINER: Template = Template {
    role: "You sit between the designer and the analysis team and keep the conversation organized.",
    task: "\
Solutions proposed so far:
{high_level_solutions}",
    pipeline: "",
    verification: "Keep the numbering of the proposed solutions when you refer to them.",
    interaction: "\
Prefix every part of your reply with a line `---To XXX---` naming who receives \
it: Designer, Analyzer or Adapter.",
};

const REFINER_FROM_ANALYZER: &str = "\
Pipeline A (input from the Analyzer): tidy the solution list, keep each \
item short, and send it to the Designer asking which items to carry out.";

const REFINER_FROM_DESIGNER: &str = "\
Pipeline B (input from the Designer): read the reply below.
If the designer picked one or more solutions, confirm the pick to the Designer \
and forward the chosen solution text to the Adapter.
If the designer asked for changes, restate the requested changes as feedback \
for the Analyzer.

Designer reply:
{designer_feedback}";

const ADAPTER: Template = Template {
    role: "You translate agreed design directions into precise layout requests.",
    task: "\
Turn the chosen solution into concrete requests, one per line.
Chosen solution:
{solution}

Candidates found in the circuit:
{grounding}

Circuit:
{netlist}",
    pipeline: "\
1. Match the solution to circuit structures (differential pairs, matched \
capacitors or resistors, supply nets).
2. Keep the candidates that serve the solution.
3. Phrase each as a direct instruction such as `add symmetry between M6 and M7`.",
    verification: "Every device or net you mention must appear in the circuit.",
    interaction: "Write numbered lines only, no commentary.",
};

const GENERATOR: Template = Template {
    role: "You are the command writer for an analog layout editor.",
    task: "\
Write the command script for the request below.

Request:
{request}

Circuit:
{netlist}

Current layout:
{layout}

Commands:
{commands}",
    pipeline: "\
1. Check that the request names existing devices, nets and wires and gives \
every required number.
2. If it does, write one command per required edit in execution order.
3. If it does not, refuse and explain what is missing.",
    verification: "\
Never invent names or fill in missing numbers. Respect the argument order of \
each command. A device may belong to only one symmetry pair and one array.",
    interaction: "\
Reply with a short explanation followed by one fenced json block:
```json
{\"status\": \"ok\" | \"invalid_request\", \"commands\": [\"...\"], \"notes\": \"...\"}
```",
};

/// Short reference of the command language handed to the Generator.
pub const COMMAND_REFERENCE: &str = "\
deviceMove <device> <x> <y>
deviceSwap <deviceA> <deviceB>
arrayAdd <group> <rows> <cols> <device>...
arraySpace <group> <h> <v>
symAdd <deviceA> <deviceB> [axis2]
netRemove <net>
netReroute <net>
wireWidth <net> wire<k> <width>
wireSpacing <net> wire<k> (<net> wire<k> | <device>) <space> [horizontal|vertical|both]
netPriority <net> <priority> [<net> <priority>]...
netTopology <net> <x> <y> [<x> <y>]...";

fn template(agent: AgentId) -> Option<&'static Template> {
    match agent {
        AgentId::Classifier => Some(&CLASSIFIER),
        AgentId::Analyzer => Some(&ANALYZER),
        AgentId::Refiner => Some(&REFINER),
        AgentId::Adapter => Some(&ADAPTER),
        AgentId::Generator => Some(&GENERATOR),
        AgentId::Designer => None,
    }
}

/// Only the Analyzer sees retrieved knowledge.
pub fn has_knowledge_access(agent: AgentId) -> bool {
    agent == AgentId::Analyzer
}

/// Replaces `{name}` slots. Braces not wrapping a lowercase identifier are
/// left alone so literal JSON survives.
pub fn fill_slots(text: &str, slots: &BTreeMap<String, String>) -> Result<String, PromptError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let name_len = after
            .find(|c: char| !(c.is_ascii_lowercase() || c == '_'))
            .unwrap_or(after.len());
        if name_len > 0 && after[name_len..].starts_with('}') {
            let name = &after[..name_len];
            let value = slots.get(name).ok_or_else(|| PromptError::MissingSlot { name: name.to_string() })?;
            out.push_str(value);
            rest = &after[name_len + 1..];
        } else {
            out.push('{');
            rest = after;
        }
    }
    out.push_str(rest);
    Ok(out)
}

fn render_knowledge(chunks: &[&KnowledgeChunk]) -> String {
    chunks
        .iter()
        .map(|c| format!("[{}] {}", c.id, c.text.trim()))
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn assemble_prompt(agent: AgentId, ctx: &PromptContext, knowledge: &[&KnowledgeChunk]) -> Result<Prompt, PromptError> {
    let t = template(agent).ok_or(PromptError::NoTemplate { agent })?;
    let pipeline = match agent {
        AgentId::Refiner => match ctx.source {
            Some(AgentId::Analyzer) => REFINER_FROM_ANALYZER,
            Some(AgentId::Designer) => REFINER_FROM_DESIGNER,
            other => {
                return Err(PromptError::UnexpectedSource {
                    agent,
                    source_agent: other,
                })
            }
        },
        _ => t.pipeline,
    };
    let knowledge_text = if has_knowledge_access(agent) {
        render_knowledge(knowledge)
    } else {
        String::new()
    };
    let raw = [
        t.role,
        WORKFLOW,
        t.task,
        pipeline,
        t.verification,
        t.interaction,
    ];
    let mut sections = Vec::with_capacity(7);
    for (kind, text) in SectionKind::ORDER.iter().zip(raw) {
        sections.push(Section {
            kind: *kind,
            text: fill_slots(text, &ctx.slots)?,
        });
    }
    sections.push(Section {
        kind: SectionKind::ExternalKnowledge,
        text: knowledge_text,
    });
    Ok(Prompt { agent, sections })
}

/// One merged prompt carrying every agent's sections, used by the
/// single-agent comparison mode.
pub fn merged_prompt(ctx: &PromptContext, knowledge: &[&KnowledgeChunk]) -> Result<Prompt, PromptError> {
    let agents = [
        AgentId::Classifier,
        AgentId::Analyzer,
        AgentId::Refiner,
        AgentId::Adapter,
        AgentId::Generator,
    ];
    let mut merged: Vec<Section> = SectionKind::ORDER
        .iter()
        .map(|&kind| Section { kind, text: String::new() })
        .collect();
    for agent in agents {
        let mut c = ctx.clone();
        if agent == AgentId::Refiner {
            c.source = Some(AgentId::Analyzer);
        }
        for name in ["request", "netlist", "feedback", "high_level_solutions", "solution", "grounding", "layout", "commands"] {
            c.slots.entry(name.to_string()).or_insert_with(|| "(see above)".to_string());
        }
        let p = assemble_prompt(agent, &c, knowledge)?;
        for (dst, src) in merged.iter_mut().zip(p.sections) {
            if src.text.is_empty() || dst.text.contains(&src.text) {
                continue;
            }
            if !dst.text.is_empty() {
                dst.text.push_str("\n\n");
            }
            dst.text.push_str(&format!("[{agent}]\n{}", src.text));
        }
    }
    Ok(Prompt {
        agent: AgentId::Generator,
        sections: merged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::KnowledgeSource;

    fn chunk() -> KnowledgeChunk {
        KnowledgeChunk {
            id: "k1".into(),
            tags: vec!["symmetry".into()],
            text: "mirror the input pair".into(),
            source: KnowledgeSource::DesignNote,
        }
    }

    #[test]
    fn refiner_branches_follow_the_source() {
        let ctx = PromptContext::from(AgentId::Analyzer).slot("high_level_solutions", "1. a");
        let p = assemble_prompt(AgentId::Refiner, &ctx, &[]).unwrap();
        assert!(p.section(SectionKind::Pipeline).contains("Pipeline A"));
        assert!(!p.section(SectionKind::Pipeline).contains("Pipeline B"));

        let ctx = PromptContext::from(AgentId::Designer).slot("high_level_solutions", "1. a");
        assert_eq!(
            assemble_prompt(AgentId::Refiner, &ctx, &[]),
            Err(PromptError::MissingSlot {
                name: "designer_feedback".into()
            })
        );
        let p = assemble_prompt(AgentId::Refiner, &ctx.slot("designer_feedback", "pick 1"), &[]).unwrap();
        assert!(p.section(SectionKind::Pipeline).contains("Pipeline B"));
        assert!(p.section(SectionKind::Pipeline).contains("pick 1"));
    }

    #[test]
    fn knowledge_only_reaches_the_analyzer() {
        let c = chunk();
        let ctx = PromptContext::from(AgentId::Designer)
            .slot("request", "r")
            .slot("netlist", "n")
            .slot("feedback", "none");
        let a = assemble_prompt(AgentId::Analyzer, &ctx, &[&c]).unwrap();
        assert!(a.section(SectionKind::ExternalKnowledge).contains("mirror the input pair"));
        let k = assemble_prompt(AgentId::Classifier, &ctx, &[&c]).unwrap();
        assert_eq!(k.section(SectionKind::ExternalKnowledge), "");
        assert_eq!(k.sections().len(), 7);
        assert!(k.sections().iter().map(|s| s.kind).eq(SectionKind::ORDER));
    }

    #[test]
    fn json_braces_survive_filling() {
        let slots = BTreeMap::from([("a".to_string(), "x".to_string())]);
        assert_eq!(fill_slots("{a} {\"k\": 1} {}", &slots).unwrap(), "x {\"k\": 1} {}");
        assert!(assemble_prompt(AgentId::Designer, &PromptContext::default(), &[]).is_err());
    }

    #[test]
    fn merged_prompt_has_seven_sections() {
        let p = merged_prompt(&PromptContext::default(), &[]).unwrap();
        assert_eq!(p.sections().len(), 7);
        assert!(p.section(SectionKind::TaskDescription).contains("[Generator]"));
    }
}
