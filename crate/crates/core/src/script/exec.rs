use serde::Serialize;
use thiserror::Error;

use super::{Command, CommandScript};
use crate::layout::Layout;
use crate::placement::{self, PlacementError};
use crate::routing::{self, RoutingError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LogEntry {
    pub index: usize,
    pub command: String,
    /// Engine operations the command decomposed into.
    pub ops: Vec<String>,
    pub warnings: Vec<String>,
    pub snapshot_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("command {index} (`{command}`) failed: {error}")]
pub struct ExecError {
    pub index: usize,
    pub command: String,
    pub error: EngineError,
    /// Entries for the commands that completed before the failure.
    pub completed: Vec<LogEntry>,
}

fn to_u32(v: i64) -> u32 {
    u32::try_from(v.max(0)).unwrap_or(u32::MAX)
}

/// Applies one command to `l`, returning the engine ops and warnings. On
/// error `l` is left unchanged.
pub fn execute_command(l: &mut Layout, cmd: &Command) -> Result<(Vec<String>, Vec<String>), EngineError> {
    let mut work = l.clone();
    let mut ops: Vec<String> = Vec::new();
    let mut warnings = Vec::new();
    let mut placed = |r: placement::LegalizeReport, op: &str, ops: &mut Vec<String>| {
        ops.push(op.to_string());
        ops.push(format!("legalize[{} moved]", r.moved.len()));
        warnings.extend(r.warnings);
    };
    match cmd {
        Command::DeviceMove { device, x, y } => {
            let r = placement::device_move(&mut work, device, *x, *y)?;
            placed(r, &format!("device_move {device}"), &mut ops);
        }
        Command::DeviceSwap { a, b } => {
            let r = placement::device_swap(&mut work, a, b)?;
            placed(r, &format!("device_swap {a} {b}"), &mut ops);
        }
        Command::ArrayAdd {
            group,
            rows,
            cols,
            devices,
        } => {
            if *rows < 1 || *cols < 1 {
                return Err(PlacementError::ShapeTooSmall {
                    rows: to_u32(*rows),
                    cols: to_u32(*cols),
                    members: devices.len(),
                }
                .into());
            }
            let r = placement::array_add(&mut work, Some(group), devices, to_u32(*rows), to_u32(*cols))?;
            placed(r, &format!("array_add {group}"), &mut ops);
        }
        Command::ArraySpace { group, h, v } => {
            let r = placement::array_space(&mut work, group, *h, *v)?;
            placed(r, &format!("array_space {group}"), &mut ops);
        }
        Command::SymAdd { a, b, axis2 } => {
            let r = placement::sym_add(&mut work, a, b, *axis2)?;
            placed(r, &format!("sym_add {a} {b}"), &mut ops);
        }
        Command::NetRemove { net } => {
            routing::net_remove(&mut work, net)?;
            ops.push(format!("net_remove {net}"));
        }
        Command::NetReroute { net } => {
            routing::net_reroute(&mut work, net)?;
            ops.push(format!("net_remove {net}"));
            ops.push(format!("route_net {net}"));
        }
        Command::WireWidth { wire, width } => {
            routing::set_wire_width(&mut work, wire, *width)?;
            ops.push(format!("set_wire_width {} {}", wire.net, wire.wire));
        }
        Command::WireSpacing {
            wire,
            other,
            space,
            direction,
        } => {
            routing::set_wire_spacing(&mut work, wire, other, *space, *direction)?;
            ops.push(format!("set_wire_spacing {} {}", wire.net, wire.wire));
        }
        Command::NetPriority { entries } => {
            for (net, p) in entries {
                routing::set_net_priority(&mut work, net, *p)?;
                ops.push(format!("set_net_priority {net}"));
            }
        }
        Command::NetTopology { net, points } => {
            routing::set_net_topology(&mut work, net, points)?;
            ops.push(format!("set_net_topology {net}"));
        }
    }
    *l = work;
    Ok((ops, warnings))
}

/// Runs a script in order. Each command is atomic; execution stops at the
/// first failure, leaving the state produced by the commands before it.
pub fn execute(l: &mut Layout, s: &CommandScript) -> Result<Vec<LogEntry>, ExecError> {
    let mut log = Vec::with_capacity(s.commands.len());
    for (index, cmd) in s.commands.iter().enumerate() {
        match execute_command(l, cmd) {
            Ok((ops, warnings)) => log.push(LogEntry {
                index,
                command: cmd.to_string(),
                ops,
                warnings,
                snapshot_hash: l.snapshot_hash(),
            }),
            Err(error) => {
                return Err(ExecError {
                    index,
                    command: cmd.to_string(),
                    error,
                    completed: log,
                })
            }
        }
    }
    Ok(log)
}
