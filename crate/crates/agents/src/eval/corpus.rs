//! Seeded synthesis of labeled request corpora.

use std::collections::{BTreeMap, BTreeSet};

use layoutpilot_core::fixtures::ota_layout;
use layoutpilot_core::geom::Point;
use layoutpilot_core::layout::{Layout, SpacingDirection, SpacingTarget, WireRef};
use layoutpilot_core::routing::route_all;
use layoutpilot_core::script::{parse_command, Command};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::RequestKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_valid: usize,
    pub n_invalid: usize,
    pub min_commands: usize,
    pub max_commands: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("commands per request must be at least 1")]
    ZeroMin,
    #[error("max commands {max} is below min {min}")]
    Inverted { min: usize, max: usize },
    #[error("bad corpus spec: {0}")]
    Parse(String),
}

impl CorpusSpec {
    pub fn new(n_valid: usize, n_invalid: usize, min_commands: usize, max_commands: usize, seed: u64) -> Result<Self, SpecError> {
        if min_commands < 1 {
            return Err(SpecError::ZeroMin);
        }
        if max_commands < min_commands {
            return Err(SpecError::Inverted {
                min: min_commands,
                max: max_commands,
            });
        }
        Ok(CorpusSpec {
            n_valid,
            n_invalid,
            min_commands,
            max_commands,
            seed,
        })
    }

    /// Reads `n_valid,n_invalid,min..max[,seed]`, e.g. `1134,116,5..40,7`.
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let bad = || SpecError::Parse(text.to_string());
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad());
        let (lo, hi) = parts[2].split_once("..").ok_or_else(bad)?;
        let seed = match parts.get(3) {
            Some(s) => s.parse::<u64>().map_err(|_| bad())?,
            None => DEFAULT_SEED,
        };
        CorpusSpec::new(num(parts[0])?, num(parts[1])?, num(lo)?, num(hi.trim_start_matches('='))?, seed)
    }

    /// The bulk-test corpus shape: 1134 valid and 116 invalid requests of
    /// 5 to 40 commands.
    pub fn bulk_default() -> Self {
        CorpusSpec::new(1134, 116, 5, 40, DEFAULT_SEED).expect("valid defaults")
    }
}

pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Valid,
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Defect {
    MissingParameter,
    UnknownDevice,
    RuleOrder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub text: String,
    pub label: Label,
    pub ground_truth_script: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defect: Option<Defect>,
}

pub fn request_id(i: usize) -> String {
    format!("req-{i:05}")
}

/// The layout requests are written against: the OTA after a full route, so
/// wire references have something to point at.
pub fn corpus_context() -> Layout {
    let mut l = ota_layout();
    let r = route_all(&mut l);
    assert!(r.failed.is_empty(), "OTA routes completely");
    l
}

/// Validator-side state needed to keep a sequence legal.
#[derive(Debug, Clone, Default)]
struct Book {
    paired: BTreeSet<String>,
    in_array: BTreeMap<String, String>,
    groups: BTreeSet<String>,
    removed: BTreeSet<String>,
    rerouted: BTreeSet<String>,
}

/// Random legal command sequences over one layout.
pub struct SequenceGen<'a> {
    l: &'a Layout,
    devices: Vec<String>,
    nets: Vec<String>,
    wires: BTreeMap<String, Vec<u32>>,
    book: Book,
    next_group: u32,
}

const OPS: [&str; 11] = [
    "deviceMove",
    "deviceSwap",
    "arrayAdd",
    "arraySpace",
    "symAdd",
    "netRemove",
    "netReroute",
    "wireWidth",
    "wireSpacing",
    "netPriority",
    "netTopology",
];

impl<'a> SequenceGen<'a> {
    pub fn new(l: &'a Layout) -> Self {
        let wires = l
            .nets
            .iter()
            .filter(|(_, r)| !r.wires.is_empty())
            .map(|(n, r)| (n.clone(), r.wires.iter().map(|w| w.id).collect()))
            .collect();
        let mut book = Book::default();
        for p in &l.sym_pairs {
            book.paired.extend([p.a.clone(), p.b.clone()]);
        }
        for g in l.array_groups.values() {
            book.groups.insert(g.id.clone());
            for m in &g.members {
                book.in_array.insert(m.clone(), g.id.clone());
            }
        }
        SequenceGen {
            l,
            devices: l.placements.keys().cloned().collect(),
            nets: l.netlist().nets.keys().cloned().collect(),
            wires,
            book,
            next_group: 1,
        }
    }

    fn fresh_group(&mut self) -> String {
        loop {
            let g = format!("g{}", self.next_group);
            self.next_group += 1;
            if !self.book.groups.contains(&g) {
                return g;
            }
        }
    }

    /// A wire that the validator will accept right now.
    fn wire_ref(&self, rng: &mut impl Rng) -> Option<WireRef> {
        let nets: Vec<&String> = self
            .nets
            .iter()
            .filter(|n| !self.book.removed.contains(*n))
            .filter(|n| self.book.rerouted.contains(*n) || self.wires.contains_key(*n))
            .collect();
        let net = (*nets.choose(rng)?).clone();
        let id = match self.wires.get(&net) {
            Some(ids) => *ids.choose(rng).expect("non-empty"),
            None => 1,
        };
        Some(WireRef::new(net, id))
    }

    fn free_for_array(&self) -> Vec<&String> {
        self.devices.iter().filter(|d| !self.book.in_array.contains_key(*d)).collect()
    }

    fn applicable(&self, op: &str) -> bool {
        match op {
            "deviceSwap" => self.devices.len() >= 2,
            "arrayAdd" => self.free_for_array().len() >= 2,
            "arraySpace" => !self.book.groups.is_empty(),
            "symAdd" => self.devices.iter().any(|d| !self.book.paired.contains(d)),
            "wireWidth" | "wireSpacing" => self
                .nets
                .iter()
                .any(|n| !self.book.removed.contains(n) && (self.book.rerouted.contains(n) || self.wires.contains_key(n))),
            "netRemove" | "netReroute" | "netPriority" | "netTopology" => !self.nets.is_empty(),
            _ => !self.devices.is_empty(),
        }
    }

    /// Emits one legal command of kind `op` and books its effects.
    pub fn command(&mut self, op: &str, rng: &mut impl Rng) -> Command {
        let g = self.l.grid;
        let cmd = match op {
            "deviceMove" => {
                let d = self.devices.choose(rng).expect("devices").clone();
                let p = &self.l.placements[&d];
                Command::DeviceMove {
                    x: rng.gen_range(0..=g.width - p.w),
                    y: rng.gen_range(0..=g.height - p.h),
                    device: d,
                }
            }
            "deviceSwap" => {
                let v: Vec<&String> = self.devices.choose_multiple(rng, 2).collect();
                Command::DeviceSwap {
                    a: v[0].clone(),
                    b: v[1].clone(),
                }
            }
            "arrayAdd" => {
                let free = self.free_for_array();
                let n = rng.gen_range(2..=free.len().min(3));
                let devices: Vec<String> = free.choose_multiple(rng, n).map(|d| (*d).clone()).collect();
                let (rows, cols) = if n > 2 && rng.gen_bool(0.5) { (2, 2) } else { (1, n as i64) };
                Command::ArrayAdd {
                    group: self.fresh_group(),
                    rows,
                    cols,
                    devices,
                }
            }
            "arraySpace" => Command::ArraySpace {
                group: self.book.groups.iter().collect::<Vec<_>>().choose(rng).expect("groups").to_string(),
                h: rng.gen_range(0..=4),
                v: rng.gen_range(0..=4),
            },
            "symAdd" => {
                let free: Vec<&String> = self.devices.iter().filter(|d| !self.book.paired.contains(*d)).collect();
                let a = (*free.choose(rng).expect("free device")).clone();
                let others: Vec<&&String> = free.iter().filter(|d| ***d != a).collect();
                let b = if rng.gen_bool(0.2) || others.is_empty() {
                    a.clone()
                } else {
                    (**others.choose(rng).expect("non-empty")).clone()
                };
                let axis2 = rng.gen_bool(0.25).then(|| rng.gen_range(0..=2 * g.width));
                Command::SymAdd { a, b, axis2 }
            }
            "netRemove" => Command::NetRemove {
                net: self.nets.choose(rng).expect("nets").clone(),
            },
            "netReroute" => Command::NetReroute {
                net: self.nets.choose(rng).expect("nets").clone(),
            },
            "wireWidth" => Command::WireWidth {
                wire: self.wire_ref(rng).expect("applicable"),
                width: rng.gen_range(1..=4),
            },
            "wireSpacing" => {
                let wire = self.wire_ref(rng).expect("applicable");
                let other = if rng.gen_bool(0.3) {
                    SpacingTarget::Device(self.devices.choose(rng).expect("devices").clone())
                } else {
                    SpacingTarget::Wire(self.wire_ref(rng).expect("applicable"))
                };
                let direction = *[SpacingDirection::Horizontal, SpacingDirection::Vertical, SpacingDirection::Both]
                    .choose(rng)
                    .expect("three");
                Command::WireSpacing {
                    wire,
                    other,
                    space: rng.gen_range(0..=5),
                    direction,
                }
            }
            "netPriority" => {
                let n = rng.gen_range(1..=3);
                Command::NetPriority {
                    entries: self
                        .nets
                        .choose_multiple(rng, n)
                        .map(|net| (net.clone(), rng.gen_range(0..=20)))
                        .collect(),
                }
            }
            "netTopology" => {
                let n = rng.gen_range(1..=3);
                Command::NetTopology {
                    net: self.nets.choose(rng).expect("nets").clone(),
                    points: (0..n)
                        .map(|_| Point::new(rng.gen_range(0..g.width), rng.gen_range(0..g.height)))
                        .collect(),
                }
            }
            other => panic!("unknown op {other}"),
        };
        self.book_effects(&cmd);
        cmd
    }

    fn book_effects(&mut self, cmd: &Command) {
        let b = &mut self.book;
        match cmd {
            Command::DeviceMove { device, .. } => {
                b.in_array.remove(device);
            }
            Command::DeviceSwap { a, b: other } => {
                let ea = b.in_array.remove(a);
                let eb = b.in_array.remove(other);
                if let Some(e) = ea {
                    b.in_array.insert(other.clone(), e);
                }
                if let Some(e) = eb {
                    b.in_array.insert(a.clone(), e);
                }
            }
            Command::ArrayAdd { group, devices, .. } => {
                b.groups.insert(group.clone());
                for d in devices {
                    b.in_array.insert(d.clone(), group.clone());
                }
            }
            Command::SymAdd { a, b: other, .. } => {
                b.paired.insert(a.clone());
                b.paired.insert(other.clone());
            }
            Command::NetRemove { net } => {
                b.removed.insert(net.clone());
            }
            Command::NetReroute { net } => {
                b.removed.remove(net);
                b.rerouted.insert(net.clone());
            }
            _ => {}
        }
    }

    /// A random applicable command.
    pub fn any(&mut self, rng: &mut impl Rng) -> Command {
        let ops: Vec<&str> = OPS.iter().copied().filter(|op| self.applicable(op)).collect();
        let op = *ops.choose(rng).expect("deviceMove always applies");
        self.command(op, rng)
    }

    /// `n` legal commands; with `array_at`, an `arrayAdd` is forced at that
    /// index when devices allow it.
    pub fn sequence(&mut self, n: usize, array_at: Option<usize>, rng: &mut impl Rng) -> Vec<Command> {
        (0..n)
            .map(|i| {
                if array_at == Some(i) && self.applicable("arrayAdd") {
                    self.command("arrayAdd", rng)
                } else {
                    self.any(rng)
                }
            })
            .collect()
    }
}

fn pick<'s>(rng: &mut impl Rng, options: &[&'s str]) -> &'s str {
    options.choose(rng).expect("non-empty")
}

fn list(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

/// One natural-language instruction for a command.
pub fn phrase(cmd: &Command, rng: &mut impl Rng) -> String {
    match cmd {
        Command::DeviceMove { device, x, y } => match rng.gen_range(0..3) {
            0 => format!("Move {device} to ({x}, {y})."),
            1 => format!("Use deviceMove to place {device} at x={x}, y={y}."),
            _ => format!("Relocate device {device} so its origin sits at {x}, {y}."),
        },
        Command::DeviceSwap { a, b } => match rng.gen_range(0..2) {
            0 => format!("Swap {a} and {b}."),
            _ => format!("Exchange the positions of {a} and {b} with deviceSwap."),
        },
        Command::ArrayAdd {
            group,
            rows,
            cols,
            devices,
        } => match rng.gen_range(0..2) {
            0 => format!("Create array group {group} with {rows} rows and {cols} columns holding {}.", list(devices)),
            _ => format!("Use arrayAdd to put {} into a {rows}x{cols} array named {group}.", list(devices)),
        },
        Command::ArraySpace { group, h, v } => match rng.gen_range(0..2) {
            0 => format!("Set the spacing of array {group} to {h} horizontally and {v} vertically."),
            _ => format!("Run arraySpace on {group} with gaps {h} and {v}."),
        },
        Command::SymAdd { a, b, axis2 } => {
            let axis = axis2.map(|ax| format!(" using doubled axis position {ax}")).unwrap_or_default();
            if a == b {
                format!("Make {a} self-symmetric{axis}.")
            } else {
                match rng.gen_range(0..2) {
                    0 => format!("Add symmetry between {a} and {b}{axis}."),
                    _ => format!("Use symAdd to mirror {a} and {b}{axis}."),
                }
            }
        }
        Command::NetRemove { net } => match rng.gen_range(0..2) {
            0 => format!("Remove the routing of net {net}."),
            _ => format!("Delete the wires of {net} with netRemove."),
        },
        Command::NetReroute { net } => match rng.gen_range(0..2) {
            0 => format!("Reroute net {net}."),
            _ => format!("Run netReroute on {net}."),
        },
        Command::WireWidth { wire, width } => match rng.gen_range(0..2) {
            0 => format!("Set the width of wire{} on net {} to {width}.", wire.wire, wire.net),
            _ => format!("Use wireWidth to make {} wire{} {width} cells wide.", wire.net, wire.wire),
        },
        Command::WireSpacing {
            wire,
            other,
            space,
            direction,
        } => {
            let target = match other {
                SpacingTarget::Wire(o) => format!("wire{} of {}", o.wire, o.net),
                SpacingTarget::Device(d) => format!("device {d}"),
            };
            format!(
                "Keep wire{} of {} at least {space} cells from {target} in the {} direction (wireSpacing).",
                wire.wire,
                wire.net,
                direction.as_str()
            )
        }
        Command::NetPriority { entries } => {
            let parts: Vec<String> = entries.iter().map(|(n, p)| format!("{n} priority {p}")).collect();
            match rng.gen_range(0..2) {
                0 => format!("Give net {}.", list(&parts)),
                _ => format!("Use netPriority to set {}.", list(&parts)),
            }
        }
        Command::NetTopology { net, points } => {
            let pts: Vec<String> = points.iter().map(|p| format!("({}, {})", p.x, p.y)).collect();
            format!("Guide net {net} through {} with netTopology.", list(&pts))
        }
    }
}

const INTROS: [&str; 4] = [
    "Please apply these edits to the layout in order:",
    "I need the following layout changes, one after another:",
    "Carry out this editing plan on the current placement:",
    "Here is what I want done, step by step:",
];

fn request_text(steps: &[String], rng: &mut impl Rng) -> String {
    let mut s = pick(rng, &INTROS).to_string();
    for (i, step) in steps.iter().enumerate() {
        s.push_str(&format!("\n{}. {step}", i + 1));
    }
    s
}

fn script_text(lines: &[String]) -> String {
    lines.iter().map(|l| format!("{l}\n")).collect()
}

fn drop_last_token(line: &str) -> String {
    let mut t: Vec<&str> = line.split_whitespace().collect();
    t.pop();
    t.join(" ")
}

fn unknown_device(l: &Layout, rng: &mut impl Rng) -> String {
    loop {
        let d = format!("M{}", rng.gen_range(900..1000));
        if l.netlist().device(&d).is_none() {
            return d;
        }
    }
}

/// Replaces one device of a device-bearing command.
fn with_device_replaced(cmd: &Command, fresh: &str, rng: &mut impl Rng) -> Option<Command> {
    let mut c = cmd.clone();
    match &mut c {
        Command::DeviceMove { device, .. } => *device = fresh.to_string(),
        Command::DeviceSwap { a, b } | Command::SymAdd { a, b, .. } => {
            if rng.gen_bool(0.5) {
                *a = fresh.to_string()
            } else {
                *b = fresh.to_string()
            }
        }
        Command::ArrayAdd { devices, .. } => {
            let i = rng.gen_range(0..devices.len());
            devices[i] = fresh.to_string();
        }
        Command::WireSpacing {
            other: SpacingTarget::Device(d),
            ..
        } => *d = fresh.to_string(),
        _ => return None,
    }
    Some(c)
}

/// Single-line defects that break parsing when the last argument is dropped.
fn missing_parameter_ok(cmd: &Command) -> bool {
    let dropped = drop_last_token(&cmd.to_string());
    parse_command(&dropped, 1).is_err()
}

fn synth_invalid(gen_ctx: &Layout, n: usize, rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<String>, Defect) {
    let mut defects = vec![Defect::MissingParameter, Defect::UnknownDevice];
    if n >= 2 {
        defects.push(Defect::RuleOrder);
    }
    let defect = *defects.choose(rng).expect("non-empty");
    match defect {
        Defect::RuleOrder => {
            let at = rng.gen_range(0..n - 1);
            let mut g = SequenceGen::new(gen_ctx);
            let mut cmds = g.sequence(n - 1, Some(at), rng);
            let add = cmds
                .iter()
                .position(|c| matches!(c, Command::ArrayAdd { .. }))
                .unwrap_or_else(|| {
                    cmds.insert(at, g.command("arrayAdd", rng));
                    cmds.pop();
                    at
                });
            let Command::ArrayAdd { group, .. } = &cmds[add] else {
                unreachable!()
            };
            let early = Command::ArraySpace {
                group: group.clone(),
                h: rng.gen_range(0..=4),
                v: rng.gen_range(0..=4),
            };
            let before = rng.gen_range(0..=add);
            cmds.insert(before, early);
            let steps = cmds.iter().map(|c| phrase(c, rng)).collect();
            (steps, cmds.iter().map(Command::to_string).collect(), defect)
        }
        Defect::MissingParameter => {
            let cmds = SequenceGen::new(gen_ctx).sequence(n, None, rng);
            let candidates: Vec<usize> = (0..n).filter(|&i| missing_parameter_ok(&cmds[i])).collect();
            let mut lines: Vec<String> = cmds.iter().map(Command::to_string).collect();
            let mut steps: Vec<String> = cmds.iter().map(|c| phrase(c, rng)).collect();
            let i = match candidates.choose(rng) {
                Some(&i) => i,
                None => {
                    // Every command here keeps a valid shorter form; swap one
                    // for a move, which cannot.
                    let i = rng.gen_range(0..n);
                    let mv = SequenceGen::new(gen_ctx).command("deviceMove", rng);
                    lines[i] = mv.to_string();
                    i
                }
            };
            lines[i] = drop_last_token(&lines[i]);
            let mut toks = lines[i].split_whitespace();
            let name = toks.next().unwrap_or_default();
            let args: Vec<&str> = toks.collect();
            steps[i] = format!("Use {name} on {}; I do not have the last value yet.", args.join(" "));
            (steps, lines, defect)
        }
        Defect::UnknownDevice => {
            let mut cmds = SequenceGen::new(gen_ctx).sequence(n, None, rng);
            let fresh = unknown_device(gen_ctx, rng);
            let bearing: Vec<usize> = (0..n).filter(|&i| !cmds[i].devices().is_empty()).collect();
            let i = match bearing.choose(rng) {
                Some(&i) => i,
                None => {
                    let i = rng.gen_range(0..n);
                    cmds[i] = SequenceGen::new(gen_ctx).command("deviceSwap", rng);
                    i
                }
            };
            cmds[i] = with_device_replaced(&cmds[i], &fresh, rng).expect("device-bearing");
            let steps = cmds.iter().map(|c| phrase(c, rng)).collect();
            (steps, cmds.iter().map(Command::to_string).collect(), defect)
        }
    }
}

/// Builds a labeled corpus. Same spec and context give identical records.
pub fn synthesize_corpus(spec: &CorpusSpec, ctx: &Layout) -> Vec<CorpusRecord> {
    assert!(!ctx.netlist().is_empty(), "corpus needs a non-empty netlist");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut labels: Vec<Label> = std::iter::repeat_n(Label::Valid, spec.n_valid)
        .chain(std::iter::repeat_n(Label::Invalid, spec.n_invalid))
        .collect();
    labels.shuffle(&mut rng);
    labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let n = rng.gen_range(spec.min_commands..=spec.max_commands);
            let (steps, lines, defect) = match label {
                Label::Valid => {
                    let cmds = SequenceGen::new(ctx).sequence(n, None, &mut rng);
                    let steps = cmds.iter().map(|c| phrase(c, &mut rng)).collect();
                    (steps, cmds.iter().map(Command::to_string).collect(), None)
                }
                Label::Invalid => {
                    let (s, l, d) = synth_invalid(ctx, n, &mut rng);
                    (s, l, Some(d))
                }
            };
            CorpusRecord {
                id: request_id(i + 1),
                text: request_text(&steps, &mut rng),
                label,
                ground_truth_script: script_text(&lines),
                defect,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindRecord {
    pub id: String,
    pub text: String,
    pub kind: RequestKind,
}

const GOALS_UP: [&str; 10] = [
    "the CMRR",
    "the matching",
    "the gain",
    "the bandwidth",
    "the phase margin",
    "the PSRR",
    "the linearity",
    "the overall performance",
    "the symmetry of the layout",
    "the routing quality",
];
const GOALS_DOWN: [&str; 7] = [
    "the offset",
    "the parasitics",
    "the crosstalk",
    "the noise",
    "the mismatch",
    "the input-referred noise",
    "the coupling between stages",
];
const UP_VERBS: [&str; 7] = [
    "Improve",
    "Enhance",
    "Boost",
    "Can you improve",
    "Help me improve",
    "I want better",
    "Optimize",
];
const DOWN_VERBS: [&str; 5] = ["Reduce", "Minimize", "How can I reduce", "Please lower", "Cut down"];
const SCOPES: [&str; 6] = [
    "",
    " of this OTA",
    " of the comparator",
    " in the input stage",
    " for the output stage",
    " without hurting speed",
];
const OPENERS: [&str; 5] = [
    "",
    "The layout has poor performance. ",
    "Post-layout results look bad. ",
    "My amplifier misses its spec. ",
    "The current placement is messy. ",
];
const REASONS: [&str; 3] = ["To improve matching, ", "For better CMRR, ", "To reduce the offset, "];

fn abstract_request(ctx: &Layout, rng: &mut impl Rng) -> String {
    let (verb, goal) = if rng.gen_bool(0.6) {
        (pick(rng, &UP_VERBS), pick(rng, &GOALS_UP))
    } else {
        (pick(rng, &DOWN_VERBS), pick(rng, &GOALS_DOWN))
    };
    let mut s = format!("{}{verb} {goal}{}", pick(rng, &OPENERS), pick(rng, &SCOPES));
    if rng.gen_bool(0.15) {
        let devices: Vec<&String> = ctx.placements.keys().collect();
        let d: Vec<&&String> = devices.choose_multiple(rng, 2).collect();
        s.push_str(&format!(" around {} and {}", d[0], d[1]));
    }
    s.push(if s.starts_with("How") || s.contains("Can you") { '?' } else { '.' });
    s
}

fn concrete_request(ctx: &Layout, rng: &mut impl Rng) -> String {
    let n = rng.gen_range(1..=3);
    let cmds = SequenceGen::new(ctx).sequence(n, None, rng);
    let steps: Vec<String> = cmds.iter().map(|c| phrase(c, rng)).collect();
    let body = if n == 1 { steps[0].clone() } else { steps.join(" Then ") };
    if rng.gen_bool(0.05) {
        let mut chars = body.chars();
        let first = chars.next().map(|c| c.to_ascii_lowercase()).unwrap_or_default();
        format!("{}{first}{}", pick(rng, &REASONS), chars.as_str())
    } else {
        body
    }
}

/// Labeled concrete and abstract requests for classifier evaluation.
pub fn synthesize_kind_corpus(n_concrete: usize, n_abstract: usize, seed: u64, ctx: &Layout) -> Vec<KindRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kinds: Vec<RequestKind> = std::iter::repeat_n(RequestKind::Concrete, n_concrete)
        .chain(std::iter::repeat_n(RequestKind::Abstract, n_abstract))
        .collect();
    kinds.shuffle(&mut rng);
    kinds
        .into_iter()
        .enumerate()
        .map(|(i, kind)| KindRecord {
            id: request_id(i + 1),
            text: match kind {
                RequestKind::Concrete => concrete_request(ctx, &mut rng),
                RequestKind::Abstract => abstract_request(ctx, &mut rng),
            },
            kind,
        })
        .collect()
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}

pub fn from_jsonl<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing_and_bounds() {
        assert_eq!(CorpusSpec::parse("1134,116,5..40").unwrap(), CorpusSpec::bulk_default());
        assert_eq!(CorpusSpec::parse("1,0,1..=1,3").unwrap().seed, 3);
        assert_eq!(CorpusSpec::new(1, 0, 0, 1, 0), Err(SpecError::ZeroMin));
        assert_eq!(CorpusSpec::new(1, 0, 4, 2, 0), Err(SpecError::Inverted { min: 4, max: 2 }));
        assert!(CorpusSpec::parse("1,2").is_err());
    }

    #[test]
    fn single_command_request() {
        let ctx = ota_layout();
        let c = synthesize_corpus(&CorpusSpec::new(1, 0, 1, 1, 1).unwrap(), &ctx);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].ground_truth_script.lines().count(), 1);
        assert_eq!(c[0].label, Label::Valid);
    }
}
