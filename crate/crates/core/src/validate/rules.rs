//! Syntactic (S1-S4) and logical (L1-L2) rules over command scripts.
//!
//! - S1: the command name is known.
//! - S2: argument count and argument types are right.
//! - S3: every referenced device, net, wire and group exists.
//! - S4: numeric arguments are in range.
//! - L1: no device joins two symmetry pairs or two array groups.
//! - L2: references respect definition order (a group is spaced after it is
//!   created; wire edits do not target a net removed and not yet rerouted).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::envelope::{check_envelope, ResponseEnvelope, Status};
use crate::layout::{Layout, SpacingTarget, WireRef};
use crate::script::{parse_lines, Command, CommandScript, ParseErrorKind, ScriptLine};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    S1,
    S2,
    S3,
    S4,
    L1,
    L2,
}

impl RuleId {
    pub const ALL: [RuleId; 6] = [RuleId::S1, RuleId::S2, RuleId::S3, RuleId::S4, RuleId::L1, RuleId::L2];

    pub fn is_syntax(self) -> bool {
        matches!(self, RuleId::S1 | RuleId::S2 | RuleId::S3 | RuleId::S4)
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: RuleId,
    /// Command indices involved, ascending.
    pub indices: Vec<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryResult {
    pub pass: bool,
    pub reason: Option<String>,
}

impl CategoryResult {
    pub fn pass() -> Self {
        CategoryResult { pass: true, reason: None }
    }

    pub fn fail(reason: impl Into<String>) -> Self {
        CategoryResult {
            pass: false,
            reason: Some(reason.into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidityOutcome {
    CorrectlyRejected,
    CorrectlyAccepted,
    Wrong,
}

impl ValidityOutcome {
    pub fn is_correct(self) -> bool {
        self != ValidityOutcome::Wrong
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expected {
    Valid,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub formatting: CategoryResult,
    pub validity: Option<ValidityOutcome>,
    pub syntax: Vec<Violation>,
    pub logic: Vec<Violation>,
    pub overall: bool,
}

impl ValidationReport {
    fn finish(mut self) -> Self {
        self.overall = self.formatting.pass
            && self.validity.is_none_or(ValidityOutcome::is_correct)
            && self.syntax.is_empty()
            && self.logic.is_empty();
        self
    }

    pub fn rules(&self) -> BTreeSet<RuleId> {
        self.syntax.iter().chain(&self.logic).map(|v| v.rule).collect()
    }

    pub fn is_clean(&self) -> bool {
        self.syntax.is_empty() && self.logic.is_empty()
    }
}

struct Checker<'a> {
    l: &'a Layout,
    syntax: Vec<Violation>,
    logic: Vec<Violation>,
    /// Device -> (pair devices, defining command index).
    pairs: BTreeMap<String, ((String, String), Option<usize>)>,
    /// Device -> (group id, defining command index).
    arrays: BTreeMap<String, (String, Option<usize>)>,
    groups: BTreeSet<String>,
    removed: BTreeSet<String>,
    rerouted: BTreeSet<String>,
    /// Group id -> index of its `arrayAdd` in this script.
    defined_later: BTreeMap<String, usize>,
}

impl<'a> Checker<'a> {
    fn new(l: &'a Layout, lines: &[ScriptLine]) -> Self {
        let mut pairs = BTreeMap::new();
        for p in &l.sym_pairs {
            for d in [&p.a, &p.b] {
                pairs.insert(d.clone(), ((p.a.clone(), p.b.clone()), None));
            }
        }
        let mut arrays = BTreeMap::new();
        for g in l.array_groups.values() {
            for m in &g.members {
                arrays.insert(m.clone(), (g.id.clone(), None));
            }
        }
        let mut defined_later = BTreeMap::new();
        for (i, line) in lines.iter().enumerate() {
            if let Ok(Command::ArrayAdd { group, .. }) = &line.parsed {
                defined_later.entry(group.clone()).or_insert(i);
            }
        }
        Checker {
            l,
            syntax: Vec::new(),
            logic: Vec::new(),
            pairs,
            arrays,
            groups: l.array_groups.keys().cloned().collect(),
            removed: BTreeSet::new(),
            rerouted: BTreeSet::new(),
            defined_later,
        }
    }

    fn push(&mut self, rule: RuleId, mut indices: Vec<usize>, message: String) {
        indices.sort_unstable();
        indices.dedup();
        let v = Violation { rule, indices, message };
        if rule.is_syntax() {
            self.syntax.push(v);
        } else {
            self.logic.push(v);
        }
    }

    fn device_known(&self, d: &str) -> bool {
        self.l.placements.contains_key(d)
    }

    fn check_references(&mut self, i: usize, cmd: &Command) -> bool {
        let mut ok = true;
        for d in cmd.devices() {
            if !self.device_known(d) {
                self.push(RuleId::S3, vec![i], format!("unknown device `{d}`"));
                ok = false;
            }
        }
        for n in cmd.nets() {
            if !self.l.netlist().has_net(n) {
                self.push(RuleId::S3, vec![i], format!("unknown net `{n}`"));
                ok = false;
            }
        }
        if !ok {
            return false;
        }
        let wires: Vec<&WireRef> = match cmd {
            Command::WireWidth { wire, .. } => vec![wire],
            Command::WireSpacing { wire, other, .. } => match other {
                SpacingTarget::Wire(o) => vec![wire, o],
                SpacingTarget::Device(_) => vec![wire],
            },
            _ => Vec::new(),
        };
        for w in wires {
            if self.removed.contains(&w.net) {
                self.push(
                    RuleId::L2,
                    vec![i],
                    format!("{w} is edited after its net was removed and before it is rerouted"),
                );
                ok = false;
            } else if !self.rerouted.contains(&w.net) && self.l.nets.get(&w.net).and_then(|r| r.wire(w.wire)).is_none() {
                self.push(RuleId::S3, vec![i], format!("unknown {w}"));
                ok = false;
            }
        }
        if let Command::ArraySpace { group, .. } = cmd {
            if !self.groups.contains(group) {
                match self.defined_later.get(group) {
                    Some(&at) if at > i => self.push(
                        RuleId::L2,
                        vec![i, at],
                        format!("group `{group}` is spaced before it is created"),
                    ),
                    _ => self.push(RuleId::S3, vec![i], format!("unknown group `{group}`")),
                }
                ok = false;
            }
        }
        ok
    }

    fn check_ranges(&mut self, i: usize, cmd: &Command) {
        let g = self.l.grid;
        let mut problems: Vec<String> = Vec::new();
        let mut bad = |what: String| problems.push(what);
        match cmd {
            Command::DeviceMove { device, x, y } => {
                let (w, h) = self
                    .l
                    .placements
                    .get(device)
                    .map(|p| (p.w, p.h))
                    .unwrap_or((1, 1));
                if *x < 0 || *y < 0 || x + w > g.width || y + h > g.height {
                    bad(format!("destination ({x}, {y}) is outside the {}x{} grid", g.width, g.height));
                }
            }
            Command::ArrayAdd { rows, cols, devices, .. } => {
                if *rows < 1 || *cols < 1 {
                    bad(format!("array shape {rows}x{cols} must be positive"));
                } else if rows.saturating_mul(*cols) < devices.len() as i64 {
                    bad(format!("array shape {rows}x{cols} holds fewer than {} devices", devices.len()));
                }
            }
            Command::ArraySpace { h, v, .. } => {
                if *h < 0 || *v < 0 {
                    bad(format!("array spacing ({h}, {v}) must be nonnegative"));
                }
            }
            Command::SymAdd { axis2: Some(ax), .. } => {
                if *ax < 0 || *ax > 2 * g.width {
                    bad(format!("axis {ax} is outside the grid"));
                }
            }
            Command::WireWidth { wire, width } => {
                if *width < 1 {
                    bad(format!("wire width {width} must be at least 1"));
                }
                if wire.wire < 1 {
                    bad("wire ids start at 1".into());
                }
            }
            Command::WireSpacing { wire, other, space, .. } => {
                if *space < 0 {
                    bad(format!("spacing {space} must be nonnegative"));
                }
                let zero = wire.wire < 1 || matches!(other, SpacingTarget::Wire(o) if o.wire < 1);
                if zero {
                    bad("wire ids start at 1".into());
                }
            }
            Command::NetTopology { points, .. } => {
                for p in points {
                    if !g.contains(*p) {
                        bad(format!("guide point {p} is outside the grid"));
                    }
                }
            }
            _ => {}
        }
        for p in problems {
            self.push(RuleId::S4, vec![i], p);
        }
    }

    fn check_logic(&mut self, i: usize, cmd: &Command) {
        match cmd {
            Command::SymAdd { a, b, .. } => {
                let mut conflict = false;
                for d in [a, b] {
                    if let Some(((pa, pb), at)) = self.pairs.get(d.as_str()).cloned() {
                        let same = (pa == *a && pb == *b) || (pa == *b && pb == *a);
                        if !same {
                            let mut idx = vec![i];
                            idx.extend(at);
                            self.push(
                                RuleId::L1,
                                idx,
                                format!("`{d}` would join a second symmetry pair (already with {pa}/{pb})"),
                            );
                            conflict = true;
                        }
                    }
                }
                if !conflict {
                    for d in [a, b] {
                        self.pairs.insert(d.clone(), ((a.clone(), b.clone()), Some(i)));
                    }
                }
            }
            Command::ArrayAdd { group, devices, .. } => {
                if self.groups.contains(group) {
                    self.push(RuleId::L2, vec![i], format!("group `{group}` is created twice"));
                    return;
                }
                let mut seen = BTreeSet::new();
                let mut conflict = false;
                for d in devices {
                    if let Some((g, at)) = self.arrays.get(d).cloned() {
                        let mut idx = vec![i];
                        idx.extend(at);
                        self.push(RuleId::L1, idx, format!("`{d}` is already in array group `{g}`"));
                        conflict = true;
                    } else if !seen.insert(d.as_str()) {
                        self.push(RuleId::L1, vec![i], format!("`{d}` is listed twice in group `{group}`"));
                        conflict = true;
                    }
                }
                if !conflict {
                    self.groups.insert(group.clone());
                    for d in devices {
                        self.arrays.insert(d.clone(), (group.clone(), Some(i)));
                    }
                }
            }
            Command::DeviceMove { device, .. } => {
                self.arrays.remove(device);
            }
            Command::DeviceSwap { a, b } => {
                let ea = self.arrays.remove(a);
                let eb = self.arrays.remove(b);
                if let Some(e) = ea {
                    self.arrays.insert(b.clone(), e);
                }
                if let Some(e) = eb {
                    self.arrays.insert(a.clone(), e);
                }
            }
            Command::NetRemove { net } => {
                self.removed.insert(net.clone());
            }
            Command::NetReroute { net } => {
                self.removed.remove(net);
                self.rerouted.insert(net.clone());
            }
            _ => {}
        }
    }
}

/// Checks parsed lines against the layout they would run on.
pub fn check_lines(lines: &[ScriptLine], l: &Layout) -> (Vec<Violation>, Vec<Violation>) {
    let mut c = Checker::new(l, lines);
    for (i, line) in lines.iter().enumerate() {
        match &line.parsed {
            Err(e) => {
                let rule = match e.kind {
                    ParseErrorKind::UnknownCommand { .. } => RuleId::S1,
                    _ => RuleId::S2,
                };
                c.push(rule, vec![i], e.kind.to_string());
            }
            Ok(cmd) => {
                c.check_ranges(i, cmd);
                if c.check_references(i, cmd) {
                    c.check_logic(i, cmd);
                }
            }
        }
    }
    (c.syntax, c.logic)
}

fn report(formatting: CategoryResult, validity: Option<ValidityOutcome>, syntax: Vec<Violation>, logic: Vec<Violation>) -> ValidationReport {
    ValidationReport {
        formatting,
        validity,
        syntax,
        logic,
        overall: false,
    }
    .finish()
}

pub fn validate_text(text: &str, l: &Layout) -> ValidationReport {
    let (syntax, logic) = check_lines(&parse_lines(text), l);
    report(CategoryResult::pass(), None, syntax, logic)
}

pub fn validate_script(s: &CommandScript, l: &Layout) -> ValidationReport {
    validate_text(&crate::script::serialize_script(s), l)
}

/// Structural validity judgment on an envelope's status.
pub fn judge_validity(expected: Expected, report: &ValidationReport, env: &ResponseEnvelope) -> ValidityOutcome {
    match (expected, env.payload.status) {
        (Expected::Invalid, Status::InvalidRequest) => ValidityOutcome::CorrectlyRejected,
        (Expected::Valid, Status::Ok) if report.formatting.pass && report.is_clean() => ValidityOutcome::CorrectlyAccepted,
        _ => ValidityOutcome::Wrong,
    }
}

/// Runs every sanity-check category over a raw agent reply.
pub fn evaluate_response(raw: &str, expected: Option<Expected>, l: &Layout) -> (Option<ResponseEnvelope>, ValidationReport) {
    match check_envelope(raw) {
        Err(e) => (
            None,
            report(CategoryResult::fail(e.0), expected.map(|_| ValidityOutcome::Wrong), Vec::new(), Vec::new()),
        ),
        Ok(env) => {
            let (syntax, logic) = check_lines(&parse_lines(&env.script_text()), l);
            let mut r = report(CategoryResult::pass(), None, syntax, logic);
            r.validity = expected.map(|e| judge_validity(e, &r, &env));
            (Some(env), r.finish())
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::layout::load_layout;
    use crate::netlist::parse_netlist;

    fn ctx() -> Layout {
        let n = Arc::new(
            parse_netlist(
                "M6 d1 g1 s b nmos W=2 L=1\nM7 d2 g2 s b nmos W=2 L=1\nM9 d3 g3 s b nmos W=2 L=1\nM3 d3 g1 s b nmos W=4 L=1",
            )
            .unwrap(),
        );
        load_layout(n, "grid 50 50\nM6 0 0 2 2 R0\nM7 10 0 2 2 R0\nM9 20 0 2 2 R0\nM3 30 0 4 2 R0").unwrap()
    }

    #[test]
    fn device_in_two_pairs_is_l1() {
        let r = validate_text("symAdd M6 M7\nsymAdd M6 M9", &ctx());
        assert!(r.syntax.is_empty());
        assert_eq!(r.logic.len(), 1);
        assert_eq!(r.logic[0].rule, RuleId::L1);
        assert_eq!(r.logic[0].indices, vec![0, 1]);
        assert!(!r.overall);
    }

    #[test]
    fn missing_coordinate_is_s2() {
        let r = validate_text("deviceMove M3 100", &ctx());
        assert_eq!(r.syntax.len(), 1);
        assert_eq!((r.syntax[0].rule, r.syntax[0].indices.clone()), (RuleId::S2, vec![0]));
    }

    #[test]
    fn each_rule_fires() {
        let l = ctx();
        let rules = |t: &str| validate_text(t, &l).rules();
        assert_eq!(rules("devMove M3 1 1"), [RuleId::S1].into());
        assert_eq!(rules("deviceMove MX9 1 1"), [RuleId::S3].into());
        assert_eq!(rules("deviceMove M3 49 1"), [RuleId::S4].into());
        assert_eq!(rules("arraySpace g1 1 1\narrayAdd g1 1 2 M6 M7"), [RuleId::L2].into());
        assert_eq!(rules("arraySpace g1 1 1"), [RuleId::S3].into());
        assert_eq!(rules("wireWidth d1 wire1 2"), [RuleId::S3].into());
        assert_eq!(rules("netRemove d1\nwireWidth d1 wire1 2"), [RuleId::L2].into());
        assert!(rules("netRemove d1\nnetReroute d1\nwireWidth d1 wire1 2").is_empty());
        assert!(rules("symAdd M6 M7\nsymAdd M7 M6\nsymAdd M3 M3").is_empty());
    }

    #[test]
    fn judge_validity_cases() {
        let l = ctx();
        let (env, rep) = evaluate_response("No such device.\n{\"status\": \"invalid_request\"}", Some(Expected::Invalid), &l);
        assert!(env.is_some());
        assert_eq!(rep.validity, Some(ValidityOutcome::CorrectlyRejected));
        assert!(rep.overall);
        let (_, rep) = evaluate_response("{\"status\": \"invalid_request\"}", Some(Expected::Valid), &l);
        assert_eq!(rep.validity, Some(ValidityOutcome::Wrong));
        assert!(!rep.overall);
        let (_, rep) = evaluate_response("```json\n{\"status\":\"ok\",\"commands\":[\"symAdd M6 M7\"]}\n```", Some(Expected::Valid), &l);
        assert_eq!(rep.validity, Some(ValidityOutcome::CorrectlyAccepted));
        let (_, rep) = evaluate_response("done", Some(Expected::Valid), &l);
        assert!(!rep.formatting.pass && !rep.overall);
    }
}
