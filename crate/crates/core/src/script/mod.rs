//! The eleven-command layout script language.
//!
//! One command per line, whitespace-separated tokens, `#` comments:
//!
//! ```text
//! deviceMove M3 10 4
//! deviceSwap M11 M13
//! arrayAdd g1 2 2 C1 C2 C3 C4
//! arraySpace g1 2 2
//! symAdd M34 M35 [axis2]
//! netRemove net7
//! netReroute net7
//! wireWidth VDD wire1 3
//! wireSpacing net9 wire3 net11 wire5 150 horizontal
//! wireSpacing net9 wire3 M1 2 [direction]
//! netPriority net0130 10 [net p ...]
//! netTopology net2 4500 6800 [x y ...]
//! ```

mod exec;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use exec::{execute, execute_command, EngineError, ExecError, LogEntry};

use crate::geom::Point;
use crate::layout::{SpacingDirection, SpacingTarget, WireRef};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "op", rename_all = "camelCase")]
pub enum Command {
    DeviceMove { device: String, x: i64, y: i64 },
    DeviceSwap { a: String, b: String },
    ArrayAdd { group: String, rows: i64, cols: i64, devices: Vec<String> },
    ArraySpace { group: String, h: i64, v: i64 },
    SymAdd { a: String, b: String, axis2: Option<i64> },
    NetRemove { net: String },
    NetReroute { net: String },
    WireWidth { wire: WireRef, width: i64 },
    WireSpacing {
        wire: WireRef,
        other: SpacingTarget,
        space: i64,
        direction: SpacingDirection,
    },
    NetPriority { entries: Vec<(String, i64)> },
    NetTopology { net: String, points: Vec<Point> },
}

/// Command names in canonical spelling.
pub const COMMAND_NAMES: [&str; 11] = [
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

/// Accepted alternate spelling of `wireSpacing`.
pub const WIRE_SPACING_ALIAS: &str = "wwSpacing";

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::DeviceMove { .. } => "deviceMove",
            Command::DeviceSwap { .. } => "deviceSwap",
            Command::ArrayAdd { .. } => "arrayAdd",
            Command::ArraySpace { .. } => "arraySpace",
            Command::SymAdd { .. } => "symAdd",
            Command::NetRemove { .. } => "netRemove",
            Command::NetReroute { .. } => "netReroute",
            Command::WireWidth { .. } => "wireWidth",
            Command::WireSpacing { .. } => "wireSpacing",
            Command::NetPriority { .. } => "netPriority",
            Command::NetTopology { .. } => "netTopology",
        }
    }

    /// Device names this command refers to.
    pub fn devices(&self) -> Vec<&str> {
        match self {
            Command::DeviceMove { device, .. } => vec![device],
            Command::DeviceSwap { a, b } | Command::SymAdd { a, b, .. } => vec![a, b],
            Command::ArrayAdd { devices, .. } => devices.iter().map(String::as_str).collect(),
            Command::WireSpacing {
                other: SpacingTarget::Device(d),
                ..
            } => vec![d],
            _ => Vec::new(),
        }
    }

    /// Net names this command refers to.
    pub fn nets(&self) -> Vec<&str> {
        match self {
            Command::NetRemove { net } | Command::NetReroute { net } | Command::NetTopology { net, .. } => vec![net],
            Command::WireWidth { wire, .. } => vec![&wire.net],
            Command::WireSpacing { wire, other, .. } => match other {
                SpacingTarget::Wire(o) => vec![&wire.net, &o.net],
                SpacingTarget::Device(_) => vec![&wire.net],
            },
            Command::NetPriority { entries } => entries.iter().map(|(n, _)| n.as_str()).collect(),
            _ => Vec::new(),
        }
    }
}

fn wire_token(w: u32) -> String {
    format!("wire{w}")
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self.name();
        match self {
            Command::DeviceMove { device, x, y } => write!(f, "{name} {device} {x} {y}"),
            Command::DeviceSwap { a, b } => write!(f, "{name} {a} {b}"),
            Command::ArrayAdd {
                group,
                rows,
                cols,
                devices,
            } => write!(f, "{name} {group} {rows} {cols} {}", devices.join(" ")),
            Command::ArraySpace { group, h, v } => write!(f, "{name} {group} {h} {v}"),
            Command::SymAdd { a, b, axis2 } => match axis2 {
                Some(ax) => write!(f, "{name} {a} {b} {ax}"),
                None => write!(f, "{name} {a} {b}"),
            },
            Command::NetRemove { net } | Command::NetReroute { net } => write!(f, "{name} {net}"),
            Command::WireWidth { wire, width } => {
                write!(f, "{name} {} {} {width}", wire.net, wire_token(wire.wire))
            }
            Command::WireSpacing {
                wire,
                other,
                space,
                direction,
            } => {
                write!(f, "{name} {} {} ", wire.net, wire_token(wire.wire))?;
                match other {
                    SpacingTarget::Wire(o) => write!(f, "{} {}", o.net, wire_token(o.wire))?,
                    SpacingTarget::Device(d) => write!(f, "{d}")?,
                }
                write!(f, " {space} {}", direction.as_str())
            }
            Command::NetPriority { entries } => {
                f.write_str(name)?;
                for (n, p) in entries {
                    write!(f, " {n} {p}")?;
                }
                Ok(())
            }
            Command::NetTopology { net, points } => {
                write!(f, "{name} {net}")?;
                for p in points {
                    write!(f, " {} {}", p.x, p.y)?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CommandScript {
    pub commands: Vec<Command>,
    /// 1-based source line of each command.
    pub source_lines: Vec<usize>,
}

impl CommandScript {
    pub fn new(commands: Vec<Command>) -> Self {
        let source_lines = (1..=commands.len()).collect();
        CommandScript {
            commands,
            source_lines,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParseErrorKind {
    #[error("unknown command `{name}`")]
    UnknownCommand { name: String },
    #[error("`{command}` expects {expected} arguments, got {got}")]
    Arity {
        command: String,
        expected: String,
        got: usize,
    },
    #[error("`{token}` is not a valid {what}")]
    BadNumber { token: String, what: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

/// One non-blank script line, parsed or not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptLine {
    pub line: usize,
    pub text: String,
    pub parsed: Result<Command, ParseError>,
}

fn strip_comment(raw: &str) -> &str {
    raw.split('#').next().unwrap_or("").trim()
}

/// Parses every command line, keeping errors in place.
pub fn parse_lines(text: &str) -> Vec<ScriptLine> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let body = strip_comment(raw);
            (!body.is_empty()).then(|| ScriptLine {
                line: i + 1,
                text: body.to_string(),
                parsed: parse_command(body, i + 1),
            })
        })
        .collect()
}

/// Parses a script, failing on the first malformed line.
pub fn parse_script(text: &str) -> Result<CommandScript, ParseError> {
    let mut commands = Vec::new();
    let mut source_lines = Vec::new();
    for l in parse_lines(text) {
        commands.push(l.parsed?);
        source_lines.push(l.line);
    }
    Ok(CommandScript {
        commands,
        source_lines,
    })
}

/// Canonical text, one command per line.
pub fn serialize_script(s: &CommandScript) -> String {
    s.commands.iter().map(|c| format!("{c}\n")).collect()
}

struct Cursor<'a> {
    line: usize,
    name: &'a str,
    args: &'a [&'a str],
}

impl Cursor<'_> {
    fn arity(&self, expected: &str) -> ParseError {
        ParseError {
            line: self.line,
            kind: ParseErrorKind::Arity {
                command: self.name.to_string(),
                expected: expected.to_string(),
                got: self.args.len(),
            },
        }
    }

    fn int(&self, tok: &str, what: &str) -> Result<i64, ParseError> {
        tok.parse::<i64>().map_err(|_| self.bad(tok, what))
    }

    fn bad(&self, tok: &str, what: &str) -> ParseError {
        ParseError {
            line: self.line,
            kind: ParseErrorKind::BadNumber {
                token: tok.to_string(),
                what: what.to_string(),
            },
        }
    }

    fn wire(&self, tok: &str) -> Result<u32, ParseError> {
        let digits = tok.strip_prefix("wire").unwrap_or(tok);
        digits.parse::<u32>().map_err(|_| self.bad(tok, "wire id"))
    }
}

fn parse_direction(tok: &str) -> Option<SpacingDirection> {
    match tok {
        "horizontal" | "h" => Some(SpacingDirection::Horizontal),
        "vertical" | "v" => Some(SpacingDirection::Vertical),
        "both" => Some(SpacingDirection::Both),
        _ => None,
    }
}

/// Parses a single command line (comments already stripped).
pub fn parse_command(body: &str, line: usize) -> Result<Command, ParseError> {
    let toks: Vec<&str> = body.split_whitespace().collect();
    let Some((&name, args)) = toks.split_first() else {
        return Err(ParseError {
            line,
            kind: ParseErrorKind::UnknownCommand { name: String::new() },
        });
    };
    let c = Cursor { line, name, args };
    let s = |i: usize| args[i].to_string();
    match name {
        "deviceMove" => {
            if args.len() != 3 {
                return Err(c.arity("3"));
            }
            Ok(Command::DeviceMove {
                device: s(0),
                x: c.int(args[1], "x coordinate")?,
                y: c.int(args[2], "y coordinate")?,
            })
        }
        "deviceSwap" => {
            if args.len() != 2 {
                return Err(c.arity("2"));
            }
            Ok(Command::DeviceSwap { a: s(0), b: s(1) })
        }
        "arrayAdd" => {
            if args.len() < 4 {
                return Err(c.arity(">=4"));
            }
            Ok(Command::ArrayAdd {
                group: s(0),
                rows: c.int(args[1], "row count")?,
                cols: c.int(args[2], "column count")?,
                devices: args[3..].iter().map(|d| d.to_string()).collect(),
            })
        }
        "arraySpace" => {
            if args.len() != 3 {
                return Err(c.arity("3"));
            }
            Ok(Command::ArraySpace {
                group: s(0),
                h: c.int(args[1], "horizontal space")?,
                v: c.int(args[2], "vertical space")?,
            })
        }
        "symAdd" => {
            if !(2..=3).contains(&args.len()) {
                return Err(c.arity("2 or 3"));
            }
            let axis2 = match args.get(2) {
                Some(t) => Some(c.int(t, "axis")?),
                None => None,
            };
            Ok(Command::SymAdd {
                a: s(0),
                b: s(1),
                axis2,
            })
        }
        "netRemove" | "netReroute" => {
            if args.len() != 1 {
                return Err(c.arity("1"));
            }
            Ok(if name == "netRemove" {
                Command::NetRemove { net: s(0) }
            } else {
                Command::NetReroute { net: s(0) }
            })
        }
        "wireWidth" => {
            if args.len() != 3 {
                return Err(c.arity("3"));
            }
            Ok(Command::WireWidth {
                wire: WireRef::new(s(0), c.wire(args[1])?),
                width: c.int(args[2], "width")?,
            })
        }
        "wireSpacing" | WIRE_SPACING_ALIAS => {
            let wire = |i: usize| -> Result<WireRef, ParseError> { Ok(WireRef::new(s(i), c.wire(args[i + 1])?)) };
            let (other, space_at, dir_at) = match args.len() {
                4 => (SpacingTarget::Device(s(2)), 3, None),
                5 if parse_direction(args[4]).is_some() => {
                    (SpacingTarget::Device(s(2)), 3, Some(4))
                }
                5 => (SpacingTarget::Wire(wire(2)?), 4, None),
                6 => (SpacingTarget::Wire(wire(2)?), 4, Some(5)),
                _ => return Err(c.arity("4 to 6")),
            };
            let direction = match dir_at {
                Some(i) => parse_direction(args[i]).ok_or_else(|| c.bad(args[i], "direction"))?,
                None => SpacingDirection::Both,
            };
            Ok(Command::WireSpacing {
                wire: wire(0)?,
                other,
                space: c.int(args[space_at], "spacing")?,
                direction,
            })
        }
        "netPriority" => {
            if args.is_empty() || args.len() % 2 != 0 {
                return Err(c.arity("an even number >=2 of"));
            }
            let entries = args
                .chunks(2)
                .map(|p| Ok((p[0].to_string(), c.int(p[1], "priority")?)))
                .collect::<Result<_, ParseError>>()?;
            Ok(Command::NetPriority { entries })
        }
        "netTopology" => {
            if args.is_empty() || args.len() % 2 != 1 {
                return Err(c.arity("a net and coordinate pairs as"));
            }
            let points = args[1..]
                .chunks(2)
                .map(|p| Ok(Point::new(c.int(p[0], "x coordinate")?, c.int(p[1], "y coordinate")?)))
                .collect::<Result<_, ParseError>>()?;
            Ok(Command::NetTopology { net: s(0), points })
        }
        other => Err(ParseError {
            line,
            kind: ParseErrorKind::UnknownCommand {
                name: other.to_string(),
            },
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym_add_defaults_axis() {
        let s = parse_script("symAdd M6 M7").unwrap();
        assert_eq!(
            s.commands,
            vec![Command::SymAdd {
                a: "M6".into(),
                b: "M7".into(),
                axis2: None
            }]
        );
    }

    #[test]
    fn sym_add_missing_device_is_arity_error() {
        let err = parse_script("symAdd M6").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(matches!(err.kind, ParseErrorKind::Arity { got: 1, .. }));
    }

    #[test]
    fn net_priority_pair() {
        let s = parse_script("netPriority net0130 10  # drain of M34").unwrap();
        assert_eq!(
            s.commands,
            vec![Command::NetPriority {
                entries: vec![("net0130".into(), 10)]
            }]
        );
    }

    #[test]
    fn alias_normalizes_and_forms_disambiguate() {
        let s = parse_script("wwSpacing net9 wire3 net11 wire5 150 horizontal\nwireSpacing n 1 M1 2 v\nwireSpacing n 1 M1 2").unwrap();
        assert_eq!(
            serialize_script(&s),
            "wireSpacing net9 wire3 net11 wire5 150 horizontal\nwireSpacing n wire1 M1 2 vertical\nwireSpacing n wire1 M1 2 both\n"
        );
    }

    #[test]
    fn errors_carry_positions() {
        let lines = parse_lines("# header\n\nfoo M1\ndeviceMove M3 100\ndeviceMove M3 x 1");
        assert_eq!(lines.len(), 3);
        assert!(matches!(&lines[0].parsed, Err(ParseError { line: 3, kind: ParseErrorKind::UnknownCommand { .. } })));
        assert!(matches!(&lines[1].parsed, Err(ParseError { line: 4, kind: ParseErrorKind::Arity { .. } })));
        assert!(matches!(&lines[2].parsed, Err(ParseError { line: 5, kind: ParseErrorKind::BadNumber { .. } })));
    }

    #[test]
    fn empty_script_serializes_empty() {
        assert_eq!(serialize_script(&parse_script("").unwrap()), "");
    }

    #[test]
    fn topology_pairs_and_empty() {
        let s = parse_script("netTopology net2 4500 6800 4700 6900\nnetTopology net2").unwrap();
        assert_eq!(
            s.commands[0],
            Command::NetTopology {
                net: "net2".into(),
                points: vec![Point::new(4500, 6800), Point::new(4700, 6900)]
            }
        );
        assert!(parse_script("netTopology net2 1").is_err());
    }
}
