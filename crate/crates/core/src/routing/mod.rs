//! Two-layer grid routing and the six routing commands.

mod astar;
mod grid;

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

pub use astar::{astar_path, astar_query, neighbors, snap_disk, step_cost, PathQuery, PathResult};
pub use grid::{build_grid, build_grid_for, net_cells, wire_footprint, Cell, CostModel, RoutingGrid};

use crate::geom::Point;
use crate::layout::{Layout, NetRoute, SpacingDirection, SpacingRule, SpacingTarget, Wire, WireRef};

/// Guide points count as visited when the path passes within this
/// Manhattan distance.
pub const SNAP_RADIUS: i64 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RoutingError {
    #[error("unknown net `{0}`")]
    UnknownNet(String),
    #[error("unknown {0}")]
    UnknownWire(WireRef),
    #[error("unknown or unplaced device `{0}`")]
    UnknownDevice(String),
    #[error("net `{0}` has unplaced pins")]
    UnplacedPins(String),
    #[error("net `{0}` is unroutable")]
    Unroutable(String),
    #[error("widening {0} cannot be routed")]
    WidthConflict(WireRef),
    #[error("point {0} lies outside the grid")]
    OutOfBounds(Point),
    #[error("wire width must be at least 1, got {0}")]
    InvalidWidth(i64),
    #[error("spacing must be nonnegative, got {0}")]
    NegativeSpacing(i64),
}

/// Routing order: higher priority first, then byte-wise ascending name.
pub fn route_order(l: &Layout, a: &str, b: &str) -> Ordering {
    l.priority(b).cmp(&l.priority(a)).then_with(|| a.as_bytes().cmp(b.as_bytes()))
}

pub fn sorted_route_order<'a>(l: &Layout, nets: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut v: Vec<&str> = nets.into_iter().collect();
    v.sort_by(|a, b| route_order(l, a, b));
    v.into_iter().map(str::to_string).collect()
}

fn require_net(l: &Layout, net: &str) -> Result<(), RoutingError> {
    if l.nets.contains_key(net) {
        Ok(())
    } else {
        Err(RoutingError::UnknownNet(net.to_string()))
    }
}

/// Splits a cell path into single-layer wires at each via.
fn split_wires(cells: &[Cell], first_id: u32) -> Vec<Wire> {
    let mut wires: Vec<Wire> = Vec::new();
    for c in cells {
        match wires.last_mut() {
            Some(w) if w.layer == c.layer => w.path.push(c.p),
            _ => wires.push(Wire {
                id: first_id + wires.len() as u32,
                path: vec![c.p],
                layer: c.layer,
                width: 1,
            }),
        }
    }
    wires
}

/// Widest override recorded for any wire of `net`.
fn net_width(l: &Layout, net: &str) -> i64 {
    l.width_overrides
        .iter()
        .filter(|(r, _)| r.net == net)
        .map(|(_, w)| *w)
        .max()
        .unwrap_or(1)
}

/// Blocks centerline cells whose square neighborhood for `width` touches a
/// blocked cell, so the widened wire fits. `exempt` cells stay usable.
fn apply_clearance(g: &mut RoutingGrid, width: i64, exempt: &BTreeSet<Cell>) {
    if width <= 1 {
        return;
    }
    let below = (width - 1) / 2;
    let above = width / 2;
    let blocked = g.blocked_cells();
    for b in blocked {
        for dy in -above..=below {
            for dx in -above..=below {
                let c = Cell {
                    layer: b.layer,
                    p: b.p.offset(dx, dy),
                };
                if !exempt.contains(&c) {
                    g.block(c);
                }
            }
        }
    }
}

/// Connects every pin of `net`, replacing any existing wires.
pub fn route_net(l: &mut Layout, net: &str) -> Result<(), RoutingError> {
    require_net(l, net)?;
    let attachments = l.netlist().nets[net].clone();
    if attachments.iter().any(|a| !l.placements.contains_key(&a.device)) {
        return Err(RoutingError::UnplacedPins(net.to_string()));
    }
    let mut pins: Vec<Point> = Vec::new();
    for p in l.net_pins(net) {
        if !pins.contains(&p) {
            pins.push(p);
        }
    }
    let mut route = NetRoute::new(net);
    route.routed = true;
    if pins.len() >= 2 {
        let mut grid = build_grid_for(l, net);
        // Pin access: the widened wire may overlap the body around its own pins.
        let width = net_width(l, net);
        let mut pin_cells: BTreeSet<Cell> = BTreeSet::new();
        for p in &pins {
            for dy in -width..=width {
                for dx in -width..=width {
                    for layer in 1..=2 {
                        pin_cells.insert(Cell {
                            layer,
                            p: p.offset(dx, dy),
                        });
                    }
                }
            }
        }
        apply_clearance(&mut grid, width, &pin_cells);
        let guides = l.topology_guides.get(net).cloned().unwrap_or_default();
        let mut tree: BTreeSet<Cell> = [Cell { layer: 1, p: pins[0] }].into();
        let mut pending: Vec<Point> = pins[1..].to_vec();
        let mut first = true;
        while !pending.is_empty() {
            // Nearest pending pin to the tree; earlier pins win ties.
            let (idx, _) = pending
                .iter()
                .enumerate()
                .map(|(i, p)| (i, tree.iter().map(|c| c.p.manhattan(*p)).min().unwrap_or(0)))
                .min_by_key(|&(i, d)| (d, i))
                .expect("non-empty");
            let pin = pending.remove(idx);
            let query = PathQuery {
                sources: vec![Cell { layer: 1, p: pin }],
                targets: tree.clone(),
                waypoints: if first { guides.clone() } else { Vec::new() },
                snap_radius: SNAP_RADIUS,
            };
            first = false;
            let path = astar_query(&grid, &query).ok_or_else(|| RoutingError::Unroutable(net.to_string()))?;
            let next_id = route.wires.len() as u32 + 1;
            route.wires.extend(split_wires(&path.cells, next_id));
            tree.extend(path.cells);
        }
    }
    for w in route.wires.iter_mut() {
        if let Some(&width) = l.width_overrides.get(&WireRef::new(net, w.id)) {
            w.width = width;
        }
    }
    l.nets.insert(net.to_string(), route);
    Ok(())
}

pub fn net_remove(l: &mut Layout, net: &str) -> Result<(), RoutingError> {
    require_net(l, net)?;
    l.nets.insert(net.to_string(), NetRoute::new(net));
    Ok(())
}

pub fn net_reroute(l: &mut Layout, net: &str) -> Result<(), RoutingError> {
    let mut work = l.clone();
    net_remove(&mut work, net)?;
    route_net(&mut work, net)?;
    *l = work;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RouteAllReport {
    /// Nets attempted, in routing order.
    pub order: Vec<String>,
    pub routed: Vec<String>,
    pub failed: Vec<(String, String)>,
}

/// Routes every unrouted or stale net in priority order. Failures are
/// recorded and the remaining nets still route.
pub fn route_all(l: &mut Layout) -> RouteAllReport {
    let stale: Vec<String> = l.nets.values().filter(|r| r.stale).map(|r| r.net.clone()).collect();
    for net in stale {
        l.nets.insert(net.clone(), NetRoute::new(&net));
    }
    let pending: Vec<&str> = l.nets.values().filter(|r| !r.routed).map(|r| r.net.as_str()).collect();
    let order = sorted_route_order(l, pending);
    let mut report = RouteAllReport {
        order: order.clone(),
        ..Default::default()
    };
    for net in order {
        match route_net(l, &net) {
            Ok(()) => report.routed.push(net),
            Err(e) => report.failed.push((net, e.to_string())),
        }
    }
    report
}

fn wire_cells(l: &Layout, r: &WireRef) -> Option<BTreeSet<Cell>> {
    let w = l.nets.get(&r.net)?.wire(r.wire)?;
    Some(wire_footprint(w).into_iter().map(|p| Cell { layer: w.layer, p }).collect())
}

fn require_wire(l: &Layout, r: &WireRef) -> Result<(), RoutingError> {
    require_net(l, &r.net)?;
    if l.nets[&r.net].wire(r.wire).is_some() {
        Ok(())
    } else {
        Err(RoutingError::UnknownWire(r.clone()))
    }
}

/// Sets the width of one wire. Foreign wires the widened footprint runs
/// into are rerouted when they come later in routing order; otherwise this
/// net reroutes around them.
pub fn set_wire_width(l: &mut Layout, r: &WireRef, width: i64) -> Result<(), RoutingError> {
    require_wire(l, r)?;
    if width < 1 {
        return Err(RoutingError::InvalidWidth(width));
    }
    let current = l.nets[&r.net].wire(r.wire).map(|w| w.width).unwrap_or(1);
    if current == width {
        return Ok(());
    }
    let mut work = l.clone();
    work.width_overrides.insert(r.clone(), width);
    if let Some(w) = work.nets.get_mut(&r.net).and_then(|n| n.wires.iter_mut().find(|w| w.id == r.wire)) {
        w.width = width;
    }
    let conflict = |e: RoutingError| match e {
        RoutingError::Unroutable(_) => RoutingError::WidthConflict(r.clone()),
        other => other,
    };
    let footprint = wire_cells(&work, r).expect("wire exists");
    let own_pins: BTreeSet<Point> = work.net_pins(&r.net).into_iter().collect();
    let hits_device = footprint.iter().any(|c| {
        c.layer == 1
            && !own_pins.contains(&c.p)
            && work.placements.values().any(|p| p.rect().contains(c.p))
    });
    let out_of_grid = footprint.iter().any(|c| !work.grid.contains(c.p));
    let mut reroute_self = hits_device || out_of_grid;
    let mut victims = Vec::new();
    for other in work.nets.keys().filter(|n| *n != &r.net) {
        if net_cells(&work, other).iter().any(|c| footprint.contains(c)) {
            if route_order(&work, other, &r.net) == Ordering::Greater {
                victims.push(other.clone());
            } else {
                reroute_self = true;
            }
        }
    }
    if reroute_self {
        net_reroute(&mut work, &r.net).map_err(conflict)?;
    } else {
        for v in &victims {
            net_remove(&mut work, v)?;
        }
        for v in &victims {
            net_reroute(&mut work, v).map_err(conflict)?;
        }
    }
    *l = work;
    Ok(())
}

/// Minimum distance between two cell sets along `dir`, over all layers.
pub fn min_distance(a: &BTreeSet<Point>, b: &BTreeSet<Point>, dir: SpacingDirection) -> Option<i64> {
    let mut best: Option<i64> = None;
    for p in a {
        for q in b {
            if let Some(d) = dir.distance(*p, *q) {
                best = Some(best.map_or(d, |m| m.min(d)));
            }
        }
    }
    best
}

fn planar(cells: BTreeSet<Cell>) -> BTreeSet<Point> {
    cells.into_iter().map(|c| c.p).collect()
}

/// Records a spacing rule and reroutes the subject net if it is violated.
pub fn set_wire_spacing(
    l: &mut Layout,
    subject: &WireRef,
    other: &SpacingTarget,
    min_space: i64,
    direction: SpacingDirection,
) -> Result<(), RoutingError> {
    require_wire(l, subject)?;
    let other_cells = match other {
        SpacingTarget::Wire(w) => {
            require_wire(l, w)?;
            planar(net_cells(l, &w.net))
        }
        SpacingTarget::Device(d) => l
            .placements
            .get(d)
            .ok_or_else(|| RoutingError::UnknownDevice(d.clone()))?
            .rect()
            .cells()
            .collect(),
    };
    if min_space < 0 {
        return Err(RoutingError::NegativeSpacing(min_space));
    }
    let rule = SpacingRule {
        subject: subject.clone(),
        other: other.clone(),
        min_space,
        direction,
    };
    let mut work = l.clone();
    if !work.spacing_rules.contains(&rule) {
        work.spacing_rules.push(rule);
    }
    let current = min_distance(&planar(net_cells(&work, &subject.net)), &other_cells, direction);
    if current.is_some_and(|d| d < min_space) {
        net_reroute(&mut work, &subject.net)?;
    }
    *l = work;
    Ok(())
}

/// Sets a net's priority. Routed nets of strictly lower priority whose wires
/// cross this net's pin region become stale, and so does this net.
pub fn set_net_priority(l: &mut Layout, net: &str, priority: i64) -> Result<(), RoutingError> {
    require_net(l, net)?;
    if l.priority(net) == priority {
        return Ok(());
    }
    l.priorities.insert(net.to_string(), priority);
    let pins = l.net_pins(net);
    if pins.is_empty() {
        return Ok(());
    }
    let x0 = pins.iter().map(|p| p.x).min().unwrap_or(0) - 1;
    let x1 = pins.iter().map(|p| p.x).max().unwrap_or(0) + 1;
    let y0 = pins.iter().map(|p| p.y).min().unwrap_or(0) - 1;
    let y1 = pins.iter().map(|p| p.y).max().unwrap_or(0) + 1;
    let inside = |p: &Point| p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
    let victims: Vec<String> = l
        .nets
        .values()
        .filter(|r| r.net != net && r.routed && l.priority(&r.net) < priority)
        .filter(|r| r.wires.iter().any(|w| w.path.iter().any(inside)))
        .map(|r| r.net.clone())
        .collect();
    if !victims.is_empty() {
        for v in &victims {
            l.nets.get_mut(v).expect("net exists").stale = true;
        }
        if let Some(own) = l.nets.get_mut(net).filter(|r| r.routed) {
            own.stale = true;
        }
    }
    Ok(())
}

/// Stores routing guides for a net; an empty list clears them. A routed net
/// becomes stale so the next routing pass follows the guides.
pub fn set_net_topology(l: &mut Layout, net: &str, guides: &[Point]) -> Result<(), RoutingError> {
    require_net(l, net)?;
    if let Some(p) = guides.iter().find(|p| !l.grid.contains(**p)) {
        return Err(RoutingError::OutOfBounds(*p));
    }
    if guides.is_empty() {
        l.topology_guides.remove(net);
    } else {
        l.topology_guides.insert(net.to_string(), guides.to_vec());
    }
    if let Some(r) = l.nets.get_mut(net).filter(|r| r.routed) {
        r.stale = true;
    }
    Ok(())
}

/// Whether the union of a net's pins and wire cells is one connected piece.
pub fn is_connected(l: &Layout, net: &str) -> bool {
    let mut cells: BTreeSet<Cell> = l.net_pins(net).into_iter().map(|p| Cell { layer: 1, p }).collect();
    if let Some(r) = l.nets.get(net) {
        for w in &r.wires {
            cells.extend(w.path.iter().map(|p| Cell { layer: w.layer, p: *p }));
        }
    }
    let Some(&start) = cells.iter().next() else {
        return true;
    };
    let mut seen: BTreeSet<Cell> = [start].into();
    let mut stack = vec![start];
    while let Some(c) = stack.pop() {
        let adjacent = [(1, 0), (-1, 0), (0, 1), (0, -1)]
            .into_iter()
            .map(|(dx, dy)| Cell { layer: c.layer, p: c.p.offset(dx, dy) })
            .chain([Cell { layer: 3 - c.layer, p: c.p }]);
        for n in adjacent {
            if cells.contains(&n) && seen.insert(n) {
                stack.push(n);
            }
        }
    }
    seen.len() == cells.len()
}
