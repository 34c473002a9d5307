//! Mutable layout state on an integer grid, plus the HPWL and area metrics.

mod snapshot;
mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Orientation, Point, Rect};
use crate::netlist::Netlist;

pub use snapshot::{snapshot_hash, SNAPSHOT_FORMAT, SNAPSHOT_VERSION};
pub use text::{format_placement_text, parse_placement_text, PlacementLine, PlacementText};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("device `{0}` is placed twice")]
    DuplicatePlacement(String),
    #[error("`{0}` lies outside the grid")]
    OutOfBounds(String),
    #[error("overlapping devices: {}", fmt_pairs(.0))]
    Overlap(Vec<(String, String)>),
    #[error("layout has no placed devices")]
    EmptyLayout,
    #[error("invalid snapshot: {0}")]
    Snapshot(String),
}

fn fmt_pairs(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .map(|(a, b)| format!("{a}/{b}"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: i64,
    pub height: i64,
    pub cell_pitch: u32,
}

impl GridSpec {
    pub fn new(width: i64, height: i64) -> Self {
        Self {
            width,
            height,
            cell_pitch: 1,
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0 && p.y >= 0 && p.x < self.width && p.y < self.height
    }

    pub fn contains_rect(&self, r: &Rect) -> bool {
        r.x0 >= 0 && r.y0 >= 0 && r.x1 <= self.width && r.y1 <= self.height
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    /// Lower-left corner, in cells.
    pub origin: Point,
    pub w: i64,
    pub h: i64,
    pub orientation: Orientation,
    /// Pin offsets in the unrotated device frame, keyed by terminal name.
    pub pins: BTreeMap<String, Point>,
}

impl Placement {
    pub fn rect(&self) -> Rect {
        Rect::from_origin(self.origin, self.w, self.h)
    }

    /// Twice the x coordinate of the body center; integral for any width.
    pub fn center2(&self) -> i64 {
        2 * self.origin.x + self.w
    }

    pub fn pin_position(&self, pin: &str) -> Option<Point> {
        let off = self.pins.get(pin)?;
        let o = self.orientation.apply(*off, self.w, self.h);
        Some(self.origin.offset(o.x, o.y))
    }
}

/// Default pin offsets: terminals spread left to right, alternating between
/// the bottom and top rows of the body.
pub fn default_pins(terminals: &[&str], w: i64, h: i64) -> BTreeMap<String, Point> {
    let n = terminals.len().max(1) as i64;
    terminals
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let i = i as i64;
            let x = (i * w / n).min(w - 1);
            let y = if i % 2 == 0 { 0 } else { h - 1 };
            (name.to_string(), Point::new(x, y))
        })
        .collect()
}

/// Symmetry constraint about the vertical line `x = axis2 / 2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymPair {
    pub a: String,
    pub b: String,
    /// Axis position doubled, so half-cell axes stay integral.
    pub axis2: i64,
}

impl SymPair {
    pub fn is_self(&self) -> bool {
        self.a == self.b
    }

    pub fn involves(&self, device: &str) -> bool {
        self.a == device || self.b == device
    }

    pub fn same_devices(&self, a: &str, b: &str) -> bool {
        (self.a == a && self.b == b) || (self.a == b && self.b == a)
    }

    pub fn partner<'a>(&'a self, device: &str) -> Option<&'a str> {
        if self.a == device {
            Some(&self.b)
        } else if self.b == device {
            Some(&self.a)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayGroup {
    pub id: String,
    /// Row-major lattice order.
    pub members: Vec<String>,
    pub rows: u32,
    pub cols: u32,
    pub hspace: i64,
    pub vspace: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WireRef {
    pub net: String,
    pub wire: u32,
}

impl WireRef {
    pub fn new(net: impl Into<String>, wire: u32) -> Self {
        Self {
            net: net.into(),
            wire,
        }
    }
}

impl fmt::Display for WireRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "wire{} of {}", self.wire, self.net)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wire {
    /// 1-based index within the net, in creation order.
    pub id: u32,
    pub path: Vec<Point>,
    /// Routing layer, 1 or 2.
    pub layer: u8,
    pub width: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetRoute {
    pub net: String,
    pub wires: Vec<Wire>,
    pub routed: bool,
    /// Set when an edit invalidated the current wires.
    pub stale: bool,
}

impl NetRoute {
    pub fn new(net: &str) -> Self {
        Self {
            net: net.to_string(),
            wires: Vec::new(),
            routed: false,
            stale: false,
        }
    }

    pub fn wire(&self, id: u32) -> Option<&Wire> {
        self.wires.iter().find(|w| w.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpacingDirection {
    Horizontal,
    Vertical,
    Both,
}

impl SpacingDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            SpacingDirection::Horizontal => "horizontal",
            SpacingDirection::Vertical => "vertical",
            SpacingDirection::Both => "both",
        }
    }

    /// Distance between two cells as measured for this direction, or `None`
    /// when the cells are not aligned along it.
    pub fn distance(self, a: Point, b: Point) -> Option<i64> {
        match self {
            SpacingDirection::Horizontal => (a.y == b.y).then(|| (a.x - b.x).abs()),
            SpacingDirection::Vertical => (a.x == b.x).then(|| (a.y - b.y).abs()),
            SpacingDirection::Both => Some((a.x - b.x).abs().max((a.y - b.y).abs())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpacingTarget {
    Wire(WireRef),
    Device(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpacingRule {
    pub subject: WireRef,
    pub other: SpacingTarget,
    pub min_space: i64,
    pub direction: SpacingDirection,
}

/// The complete editable state of one layout.
#[derive(Debug, Clone)]
pub struct Layout {
    netlist: Arc<Netlist>,
    pub grid: GridSpec,
    pub placements: BTreeMap<String, Placement>,
    pub nets: BTreeMap<String, NetRoute>,
    pub sym_pairs: Vec<SymPair>,
    pub array_groups: BTreeMap<String, ArrayGroup>,
    /// Explicit routing priorities; absent nets have priority 0.
    pub priorities: BTreeMap<String, i64>,
    pub topology_guides: BTreeMap<String, Vec<Point>>,
    pub spacing_rules: Vec<SpacingRule>,
    pub width_overrides: BTreeMap<WireRef, i64>,
}

impl PartialEq for Layout {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.netlist, &other.netlist) || self.netlist == other.netlist)
            && self.grid == other.grid
            && self.placements == other.placements
            && self.nets == other.nets
            && self.sym_pairs == other.sym_pairs
            && self.array_groups == other.array_groups
            && self.priorities == other.priorities
            && self.topology_guides == other.topology_guides
            && self.spacing_rules == other.spacing_rules
            && self.width_overrides == other.width_overrides
    }
}

impl Eq for Layout {}

/// Placement area ratio in hundredths, rounded half-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AreaRatio(pub u64);

impl AreaRatio {
    /// Rounds `num / den` half-up to two decimals.
    pub fn from_fraction(num: u128, den: u128) -> AreaRatio {
        assert!(den > 0, "zero denominator");
        AreaRatio(((200 * num + den) / (2 * den)) as u64)
    }

    pub fn hundredths(self) -> u64 {
        self.0
    }
}

impl fmt::Display for AreaRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

impl Layout {
    /// A layout with nothing placed and every net unrouted.
    pub fn empty(netlist: Arc<Netlist>, grid: GridSpec) -> Layout {
        let nets = netlist
            .nets
            .keys()
            .map(|n| (n.clone(), NetRoute::new(n)))
            .collect();
        Layout {
            netlist,
            grid,
            placements: BTreeMap::new(),
            nets,
            sym_pairs: Vec::new(),
            array_groups: BTreeMap::new(),
            priorities: BTreeMap::new(),
            topology_guides: BTreeMap::new(),
            spacing_rules: Vec::new(),
            width_overrides: BTreeMap::new(),
        }
    }

    pub fn netlist(&self) -> &Netlist {
        &self.netlist
    }

    pub fn netlist_arc(&self) -> &Arc<Netlist> {
        &self.netlist
    }

    pub fn placement(&self, device: &str) -> Option<&Placement> {
        self.placements.get(device)
    }

    pub fn priority(&self, net: &str) -> i64 {
        self.priorities.get(net).copied().unwrap_or(0)
    }

    pub fn sym_pair_of(&self, device: &str) -> Option<&SymPair> {
        self.sym_pairs.iter().find(|p| p.involves(device))
    }

    pub fn array_group_of(&self, device: &str) -> Option<&ArrayGroup> {
        self.array_groups
            .values()
            .find(|g| g.members.iter().any(|m| m == device))
    }

    /// Absolute pin positions of `net`, in attachment order. Unplaced devices
    /// contribute nothing.
    pub fn net_pins(&self, net: &str) -> Vec<Point> {
        let Some(attachments) = self.netlist.nets.get(net) else {
            return Vec::new();
        };
        attachments
            .iter()
            .filter_map(|a| {
                let device = self.netlist.device(&a.device)?;
                let placement = self.placements.get(&a.device)?;
                placement.pin_position(device.terminal_name(a.terminal))
            })
            .collect()
    }

    /// Nets attached to any of `devices`.
    pub fn nets_of_devices<'a>(&self, devices: impl IntoIterator<Item = &'a str>) -> BTreeSet<String> {
        let mut nets = BTreeSet::new();
        for name in devices {
            if let Some(d) = self.netlist.device(name) {
                nets.extend(d.terminals.iter().cloned());
            }
        }
        nets
    }

    /// Marks routed nets touching `devices` as stale.
    pub fn mark_stale_for_devices<'a>(&mut self, devices: impl IntoIterator<Item = &'a str>) {
        for net in self.nets_of_devices(devices) {
            if let Some(route) = self.nets.get_mut(&net) {
                if route.routed {
                    route.stale = true;
                }
            }
        }
    }

    /// Sum over nets with at least two placed pins of bbox width + height.
    pub fn hpwl(&self) -> i64 {
        self.netlist
            .nets
            .keys()
            .map(|net| net_hpwl(&self.net_pins(net)))
            .sum()
    }

    /// Bounding box of every placed device body.
    pub fn bounding_box(&self) -> Option<Rect> {
        self.placements
            .values()
            .map(Placement::rect)
            .reduce(|a, b| a.union(&b))
    }

    pub fn bounding_area(&self) -> Option<u128> {
        self.bounding_box()
            .map(|r| r.width() as u128 * r.height() as u128)
    }

    /// Bounding area of `self` over that of `baseline`, rounded half-up to
    /// two decimals.
    pub fn area_ratio(&self, baseline: &Layout) -> Result<AreaRatio, LayoutError> {
        let num = self.bounding_area().ok_or(LayoutError::EmptyLayout)?;
        let den = baseline.bounding_area().ok_or(LayoutError::EmptyLayout)?;
        if den == 0 {
            return Err(LayoutError::EmptyLayout);
        }
        Ok(AreaRatio::from_fraction(num, den))
    }

    /// Every pair of overlapping device bodies, name-ordered.
    pub fn overlaps(&self) -> Vec<(String, String)> {
        let items: Vec<(&String, Rect)> =
            self.placements.iter().map(|(n, p)| (n, p.rect())).collect();
        let mut out = Vec::new();
        for (i, (na, ra)) in items.iter().enumerate() {
            for (nb, rb) in &items[i + 1..] {
                if ra.overlaps(rb) {
                    out.push(((*na).clone(), (*nb).clone()));
                }
            }
        }
        out
    }

    /// Checks that every sym pair mirrors exactly about its axis.
    pub fn sym_violations(&self) -> Vec<&SymPair> {
        self.sym_pairs
            .iter()
            .filter(|p| {
                let (Some(a), Some(b)) = (self.placements.get(&p.a), self.placements.get(&p.b))
                else {
                    return true;
                };
                if p.is_self() {
                    a.center2() != p.axis2
                } else {
                    a.center2() + b.center2() != 2 * p.axis2 || a.origin.y != b.origin.y
                }
            })
            .collect()
    }

    /// Lattice position of member `index` of `group`, relative to the
    /// group's origin (the position of member 0).
    pub fn lattice_offset(&self, group: &ArrayGroup, index: usize) -> Point {
        let (pitch_x, pitch_y) = self.lattice_pitch(group);
        let cols = group.cols.max(1) as usize;
        Point::new(
            (index % cols) as i64 * pitch_x,
            (index / cols) as i64 * pitch_y,
        )
    }

    /// Column and row pitch of an array: the widest/tallest member plus spacing.
    pub fn lattice_pitch(&self, group: &ArrayGroup) -> (i64, i64) {
        let w = group
            .members
            .iter()
            .filter_map(|m| self.placements.get(m))
            .map(|p| p.w)
            .max()
            .unwrap_or(1);
        let h = group
            .members
            .iter()
            .filter_map(|m| self.placements.get(m))
            .map(|p| p.h)
            .max()
            .unwrap_or(1);
        (w + group.hspace, h + group.vspace)
    }

    pub fn array_violations(&self) -> Vec<&ArrayGroup> {
        self.array_groups
            .values()
            .filter(|g| {
                let Some(origin) = g.members.first().and_then(|m| self.placements.get(m)) else {
                    return true;
                };
                let origin = origin.origin;
                g.members.iter().enumerate().any(|(i, m)| {
                    let off = self.lattice_offset(g, i);
                    self.placements.get(m).map(|p| p.origin) != Some(origin.offset(off.x, off.y))
                })
            })
            .collect()
    }

    /// Devices that appear in more than one sym pair or array group.
    pub fn membership_violations(&self) -> Vec<String> {
        let mut bad = BTreeSet::new();
        let mut seen = BTreeSet::new();
        for p in &self.sym_pairs {
            let devices: BTreeSet<&str> = [p.a.as_str(), p.b.as_str()].into_iter().collect();
            for d in devices {
                if !seen.insert(d) {
                    bad.insert(d.to_string());
                }
            }
        }
        let mut seen = BTreeSet::new();
        for g in self.array_groups.values() {
            for m in &g.members {
                if !seen.insert(m.as_str()) {
                    bad.insert(m.clone());
                }
            }
        }
        bad.into_iter().collect()
    }

    /// Validates geometry against the netlist and grid.
    pub fn check_geometry(&self) -> Result<(), LayoutError> {
        for (name, p) in &self.placements {
            let device = self
                .netlist
                .device(name)
                .ok_or_else(|| LayoutError::UnknownDevice(name.clone()))?;
            if p.w < 1 || p.h < 1 || !self.grid.contains_rect(&p.rect()) {
                return Err(LayoutError::OutOfBounds(name.clone()));
            }
            for (pin, off) in &p.pins {
                let known = (0..device.terminals.len()).any(|i| device.terminal_name(i) == pin);
                if !known {
                    return Err(LayoutError::Snapshot(format!(
                        "device `{name}` has no terminal `{pin}`"
                    )));
                }
                if off.x < 0 || off.y < 0 || off.x >= p.w || off.y >= p.h {
                    return Err(LayoutError::OutOfBounds(format!("{name}.{pin}")));
                }
            }
        }
        let overlaps = self.overlaps();
        if !overlaps.is_empty() {
            return Err(LayoutError::Overlap(overlaps));
        }
        Ok(())
    }

    /// Canonical JSON snapshot (sorted keys, byte-stable).
    pub fn snapshot(&self) -> String {
        snapshot::to_snapshot(self)
    }

    pub fn snapshot_hash(&self) -> String {
        snapshot_hash(&self.snapshot())
    }

    pub fn from_snapshot(netlist: Arc<Netlist>, text: &str) -> Result<Layout, LayoutError> {
        snapshot::from_snapshot(netlist, text)
    }
}

/// HPWL of one net's pin set; zero for fewer than two pins.
pub fn net_hpwl(pins: &[Point]) -> i64 {
    if pins.len() < 2 {
        return 0;
    }
    let (mut x0, mut y0, mut x1, mut y1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
    for p in pins {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    (x1 - x0) + (y1 - y0)
}

/// Builds a layout from a netlist and placement text. Routes and constraints
/// start empty.
pub fn load_layout(netlist: Arc<Netlist>, placement_text: &str) -> Result<Layout, LayoutError> {
    let parsed = parse_placement_text(placement_text)?;
    let grid = parsed.grid.unwrap_or_else(|| {
        let (w, h) = parsed.lines.iter().fold((1, 1), |(w, h), l| {
            (w.max(l.origin.x + l.w), h.max(l.origin.y + l.h))
        });
        GridSpec::new(w + DEFAULT_GRID_MARGIN, h + DEFAULT_GRID_MARGIN)
    });
    let mut layout = Layout::empty(netlist, grid);
    for line in parsed.lines {
        let device = layout
            .netlist
            .device(&line.device)
            .ok_or_else(|| LayoutError::UnknownDevice(line.device.clone()))?;
        let terminals: Vec<&str> = (0..device.terminals.len())
            .map(|i| device.terminal_name(i))
            .collect();
        let placement = Placement {
            origin: line.origin,
            w: line.w,
            h: line.h,
            orientation: line.orientation,
            pins: default_pins(&terminals, line.w, line.h),
        };
        if layout.placements.insert(line.device.clone(), placement).is_some() {
            return Err(LayoutError::DuplicatePlacement(line.device));
        }
    }
    layout.check_geometry()?;
    Ok(layout)
}

/// Free cells added around the placed extent when no `grid` line is given.
pub const DEFAULT_GRID_MARGIN: i64 = 10;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_netlist;

    fn two_resistors() -> Arc<Netlist> {
        Arc::new(parse_netlist("R1 a b resistor\nR2 a c resistor").unwrap())
    }

    #[test]
    fn fresh_layout_has_no_constraints() {
        let l = load_layout(two_resistors(), "grid 20 20\nR1 0 0 2 1 R0\nR2 5 0 2 1 R0").unwrap();
        assert!(l.sym_pairs.is_empty());
        assert!(l.array_groups.is_empty());
        assert!(l.nets.values().all(|n| !n.routed && n.wires.is_empty()));
    }

    #[test]
    fn unknown_device_rejected() {
        let err = load_layout(two_resistors(), "MX9 0 0 1 1 R0").unwrap_err();
        assert_eq!(err, LayoutError::UnknownDevice("MX9".into()));
    }

    #[test]
    fn overlap_and_bounds_rejected() {
        let err = load_layout(two_resistors(), "grid 10 10\nR1 0 0 3 1 R0\nR2 2 0 3 1 R0")
            .unwrap_err();
        assert_eq!(err, LayoutError::Overlap(vec![("R1".into(), "R2".into())]));
        let err = load_layout(two_resistors(), "grid 4 4\nR1 3 0 2 1 R0").unwrap_err();
        assert_eq!(err, LayoutError::OutOfBounds("R1".into()));
    }

    #[test]
    fn missing_grid_line_adds_margin() {
        let l = load_layout(two_resistors(), "R1 0 0 2 1 R0\nR2 5 3 2 1 R0").unwrap();
        assert_eq!(l.grid, GridSpec::new(7 + DEFAULT_GRID_MARGIN, 4 + DEFAULT_GRID_MARGIN));
    }

    #[test]
    fn single_pin_net_contributes_zero() {
        assert_eq!(net_hpwl(&[Point::new(4, 4)]), 0);
        assert_eq!(net_hpwl(&[]), 0);
    }

    #[test]
    fn two_pin_hpwl_is_seven() {
        assert_eq!(net_hpwl(&[Point::new(0, 0), Point::new(3, 4)]), 7);
        // Same case through a real layout: 1x1 bodies put every pin at the origin.
        let n = Arc::new(parse_netlist("R1 a x resistor\nR2 a y resistor").unwrap());
        let l = load_layout(n, "grid 10 10\nR1 0 0 1 1 R0\nR2 3 4 1 1 R0").unwrap();
        assert_eq!(l.hpwl(), 7);
    }

    #[test]
    fn area_ratio_rounds_half_up() {
        assert_eq!(AreaRatio::from_fraction(1, 8).to_string(), "0.13");
        assert_eq!(AreaRatio::from_fraction(1, 200).to_string(), "0.01");
        assert_eq!(AreaRatio::from_fraction(1, 201).to_string(), "0.00");
        assert_eq!(AreaRatio::from_fraction(7, 7).to_string(), "1.00");
    }

    #[test]
    fn area_ratio_of_empty_layout_errors() {
        let n = two_resistors();
        let empty = Layout::empty(n.clone(), GridSpec::new(4, 4));
        let l = load_layout(n, "R1 0 0 1 1 R0").unwrap();
        assert_eq!(l.area_ratio(&empty), Err(LayoutError::EmptyLayout));
        assert_eq!(empty.area_ratio(&l), Err(LayoutError::EmptyLayout));
        assert_eq!(l.area_ratio(&l).unwrap().to_string(), "1.00");
    }

    #[test]
    fn orientation_moves_pins() {
        let pins = default_pins(&["drain", "gate", "source", "bulk"], 4, 2);
        let mut p = Placement {
            origin: Point::new(10, 10),
            w: 4,
            h: 2,
            orientation: Orientation::R0,
            pins,
        };
        assert_eq!(p.pin_position("drain"), Some(Point::new(10, 10)));
        p.orientation = Orientation::MY;
        assert_eq!(p.pin_position("drain"), Some(Point::new(13, 10)));
    }
}
