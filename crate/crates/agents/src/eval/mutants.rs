//! Golden scripts and single-defect mutants, one per validator rule.

use layoutpilot_core::layout::Layout;
use layoutpilot_core::script::{parse_command, Command};
use layoutpilot_core::validate::RuleId;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::corpus::SequenceGen;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mutant {
    pub rule: RuleId,
    pub text: String,
    /// Line index of the defect in `text`.
    pub index: usize,
}

/// A legal script of `min..=max` commands.
pub fn golden_script(ctx: &Layout, min: usize, max: usize, rng: &mut impl Rng) -> Vec<Command> {
    let n = rng.gen_range(min..=max);
    SequenceGen::new(ctx).sequence(n, None, rng)
}

/// Commands whose absence cannot make any later command invalid.
fn inert(c: &Command) -> bool {
    matches!(
        c,
        Command::SymAdd { .. }
            | Command::NetPriority { .. }
            | Command::NetTopology { .. }
            | Command::WireWidth { .. }
            | Command::WireSpacing { .. }
            | Command::ArraySpace { .. }
            | Command::NetRemove { .. }
    )
}

fn drop_last(line: &str) -> String {
    let mut t: Vec<&str> = line.split_whitespace().collect();
    t.pop();
    t.join(" ")
}

fn misspell(line: &str) -> String {
    let (name, rest) = line.split_once(' ').unwrap_or((line, ""));
    let mut chars: Vec<char> = name.chars().collect();
    chars.remove(chars.len() / 2);
    format!("{} {rest}", chars.into_iter().collect::<String>()).trim_end().to_string()
}

fn fresh_group(lines: &[String], ctx: &Layout) -> String {
    (1..)
        .map(|i| format!("gx{i}"))
        .find(|g| !ctx.array_groups.contains_key(g) && !lines.iter().any(|l| l.split_whitespace().any(|t| t == g)))
        .expect("unbounded")
}

const MISSING_NET: &str = "net_absent";
const MISSING_DEVICE: &str = "Mabsent";

/// Turns one line of a golden script into a defect of class `rule`.
pub fn mutate(golden: &[Command], rule: RuleId, ctx: &Layout, rng: &mut impl Rng) -> Mutant {
    let mut lines: Vec<String> = golden.iter().map(Command::to_string).collect();
    let inert_at: Vec<usize> = (0..golden.len()).filter(|&i| inert(&golden[i])).collect();
    let g = ctx.grid;
    let index = match rule {
        RuleId::S1 => {
            let i = match inert_at.choose(rng) {
                Some(&i) => i,
                None => {
                    let i = rng.gen_range(0..=lines.len());
                    lines.insert(i, "netPriority VDD 1".into());
                    i
                }
            };
            lines[i] = misspell(&lines[i]);
            i
        }
        RuleId::S2 => {
            let ok: Vec<usize> = inert_at
                .iter()
                .copied()
                .filter(|&i| parse_command(&drop_last(&lines[i]), 1).is_err())
                .collect();
            let i = match ok.choose(rng) {
                Some(&i) => i,
                None => {
                    let i = rng.gen_range(0..=lines.len());
                    lines.insert(i, "netRemove VDD".into());
                    i
                }
            };
            lines[i] = drop_last(&lines[i]);
            i
        }
        RuleId::S3 => {
            let i = match inert_at.choose(rng) {
                Some(&i) => i,
                None => {
                    let i = rng.gen_range(0..=lines.len());
                    lines.insert(i, "netPriority VDD 1".into());
                    i
                }
            };
            let cmd = parse_command(&lines[i], 1).expect("golden line parses");
            let replaced = match cmd {
                Command::SymAdd { b, axis2, .. } => Command::SymAdd {
                    a: MISSING_DEVICE.into(),
                    b,
                    axis2,
                },
                Command::NetPriority { mut entries } => {
                    entries[0].0 = MISSING_NET.into();
                    Command::NetPriority { entries }
                }
                Command::NetTopology { points, .. } => Command::NetTopology {
                    net: MISSING_NET.into(),
                    points,
                },
                Command::NetRemove { .. } => Command::NetRemove { net: MISSING_NET.into() },
                Command::WireWidth { mut wire, width } => {
                    wire.net = MISSING_NET.into();
                    Command::WireWidth { wire, width }
                }
                Command::WireSpacing {
                    mut wire,
                    other,
                    space,
                    direction,
                } => {
                    wire.net = MISSING_NET.into();
                    Command::WireSpacing {
                        wire,
                        other,
                        space,
                        direction,
                    }
                }
                Command::ArraySpace { h, v, .. } => Command::ArraySpace {
                    group: "gabsent".into(),
                    h,
                    v,
                },
                other => unreachable!("not inert: {other}"),
            };
            lines[i] = replaced.to_string();
            i
        }
        RuleId::S4 => {
            // Range defects keep every reference intact, so any line with a
            // number works.
            let i = rng.gen_range(0..golden.len());
            let bad = match golden[i].clone() {
                Command::DeviceMove { device, y, .. } => Command::DeviceMove { device, x: g.width, y },
                Command::ArrayAdd { group, devices, .. } => Command::ArrayAdd {
                    group,
                    rows: 1,
                    cols: devices.len() as i64 - 1,
                    devices,
                },
                Command::ArraySpace { group, v, .. } => Command::ArraySpace { group, h: -1, v },
                Command::SymAdd { a, b, .. } => Command::SymAdd {
                    a,
                    b,
                    axis2: Some(2 * g.width + 1),
                },
                Command::WireWidth { wire, .. } => Command::WireWidth { wire, width: 0 },
                Command::WireSpacing {
                    wire, other, direction, ..
                } => Command::WireSpacing {
                    wire,
                    other,
                    space: -2,
                    direction,
                },
                Command::NetTopology { net, mut points } => {
                    points[0].y = g.height;
                    Command::NetTopology { net, points }
                }
                Command::NetPriority { entries } => {
                    // Priorities have no range; move the defect onto a new
                    // out-of-grid topology guide instead.
                    let net = entries[0].0.clone();
                    lines.insert(i, format!("netTopology {net} -1 0"));
                    return Mutant {
                        rule,
                        text: join(&lines),
                        index: i,
                    };
                }
                Command::DeviceSwap { .. } | Command::NetRemove { .. } | Command::NetReroute { .. } => {
                    let net = ctx.netlist().nets.keys().next().expect("nets").clone();
                    lines.insert(i, format!("netTopology {net} {} 0", g.width));
                    return Mutant {
                        rule,
                        text: join(&lines),
                        index: i,
                    };
                }
            };
            lines[i] = bad.to_string();
            i
        }
        RuleId::L1 => {
            // A second pair for a device that is already paired, or a device
            // listed twice in a new array.
            let paired_at: Vec<(usize, &String, &String)> = golden
                .iter()
                .enumerate()
                .filter_map(|(i, c)| match c {
                    Command::SymAdd { a, b, .. } => Some((i, a, b)),
                    _ => None,
                })
                .collect();
            let devices: Vec<&String> = ctx.placements.keys().collect();
            match paired_at.choose(rng) {
                Some(&(j, a, b)) => {
                    let i = rng.gen_range(j + 1..=lines.len());
                    let other = devices.iter().find(|d| **d != a && **d != b).expect("three devices");
                    lines.insert(i, format!("symAdd {a} {other}"));
                    i
                }
                None => {
                    let i = rng.gen_range(0..=lines.len());
                    let d = devices.choose(rng).expect("devices");
                    let group = fresh_group(&lines, ctx);
                    lines.insert(i, format!("arrayAdd {group} 1 2 {d} {d}"));
                    i
                }
            }
        }
        RuleId::L2 => {
            let array_at = golden.iter().position(|c| matches!(c, Command::ArrayAdd { .. }));
            match array_at {
                Some(j) => {
                    let Command::ArrayAdd { group, .. } = &golden[j] else {
                        unreachable!()
                    };
                    let i = rng.gen_range(0..=j);
                    lines.insert(i, format!("arraySpace {group} 1 1"));
                    i
                }
                None => {
                    // Space a new group, then create it at the end.
                    let in_array: Vec<&String> = ctx.array_groups.values().flat_map(|g| &g.members).collect();
                    let free: Vec<&String> = ctx.placements.keys().filter(|d| !in_array.contains(d)).collect();
                    let pick: Vec<&&String> = free.choose_multiple(rng, 2).collect();
                    let group = fresh_group(&lines, ctx);
                    let i = rng.gen_range(0..=lines.len());
                    lines.insert(i, format!("arraySpace {group} 2 2"));
                    lines.push(format!("arrayAdd {group} 1 2 {} {}", pick[0], pick[1]));
                    i
                }
            }
        }
    };
    Mutant {
        rule,
        text: join(&lines),
        index,
    }
}

fn join(lines: &[String]) -> String {
    lines.iter().map(|l| format!("{l}\n")).collect()
}

/// `count` golden scripts, each paired with one mutant per rule.
pub fn mutant_suite(ctx: &Layout, count: usize, seed: u64) -> Vec<(String, Vec<Mutant>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let golden = golden_script(ctx, 5, 40, &mut rng);
            let mutants = RuleId::ALL.iter().map(|&r| mutate(&golden, r, ctx, &mut rng)).collect();
            (join(&golden.iter().map(Command::to_string).collect::<Vec<_>>()), mutants)
        })
        .collect()
}
