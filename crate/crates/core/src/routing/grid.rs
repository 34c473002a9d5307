use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::geom::Point;
use crate::layout::{Layout, SpacingDirection, SpacingTarget, Wire};

/// A routing cell on one of the two metal layers (1 or 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub layer: u8,
    pub p: Point,
}

impl Cell {
    pub const fn new(layer: u8, x: i64, y: i64) -> Self {
        Cell {
            layer,
            p: Point::new(x, y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostModel {
    pub via: i64,
    /// Extra cost for a horizontal step on layer 2 or a vertical step on layer 1.
    pub off_direction: i64,
    /// Extra cost for entering a cell next to a foreign wire.
    pub adjacency: i64,
}

impl CostModel {
    pub const fn standard() -> Self {
        CostModel {
            via: 3,
            off_direction: 1,
            adjacency: 1,
        }
    }

    /// Every move costs 1, vias included.
    pub const fn uniform() -> Self {
        CostModel {
            via: 1,
            off_direction: 0,
            adjacency: 0,
        }
    }
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel::standard()
    }
}

/// Sparse two-layer routing grid.
#[derive(Debug, Clone)]
pub struct RoutingGrid {
    pub width: i64,
    pub height: i64,
    pub layers: u8,
    pub cost: CostModel,
    blocked: HashSet<Cell>,
    soft: HashMap<Cell, i64>,
}

impl RoutingGrid {
    pub fn new(width: i64, height: i64, layers: u8, cost: CostModel) -> Self {
        assert!((1..=2).contains(&layers), "one or two layers");
        RoutingGrid {
            width,
            height,
            layers,
            cost,
            blocked: HashSet::new(),
            soft: HashMap::new(),
        }
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.layer >= 1 && c.layer <= self.layers && c.p.x >= 0 && c.p.y >= 0 && c.p.x < self.width && c.p.y < self.height
    }

    pub fn is_blocked(&self, c: Cell) -> bool {
        self.blocked.contains(&c)
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.is_blocked(c)
    }

    pub fn block(&mut self, c: Cell) {
        if self.in_bounds(c) {
            self.blocked.insert(c);
        }
    }

    pub fn unblock(&mut self, c: Cell) {
        self.blocked.remove(&c);
    }

    pub fn add_soft(&mut self, c: Cell, cost: i64) {
        if self.in_bounds(c) && cost > 0 {
            *self.soft.entry(c).or_insert(0) += cost;
        }
    }

    pub fn soft_cost(&self, c: Cell) -> i64 {
        self.soft.get(&c).copied().unwrap_or(0)
    }

    pub fn blocked_cells(&self) -> BTreeSet<Cell> {
        self.blocked.iter().copied().collect()
    }

    pub fn blocked_count(&self) -> usize {
        self.blocked.len()
    }
}

/// Cells covered by a wire once its width is applied. Each path cell grows
/// perpendicular to the direction of travel through it; bends grow both ways.
pub fn wire_footprint(w: &Wire) -> BTreeSet<Point> {
    let below = (w.width - 1) / 2;
    let above = w.width / 2;
    let mut cells = BTreeSet::new();
    for (i, p) in w.path.iter().enumerate() {
        let mut horizontal = false;
        let mut vertical = false;
        for q in [i.checked_sub(1).map(|j| w.path[j]), w.path.get(i + 1).copied()]
            .into_iter()
            .flatten()
        {
            if q.y == p.y {
                horizontal = true;
            } else {
                vertical = true;
            }
        }
        if !horizontal && !vertical {
            horizontal = true;
            vertical = true;
        }
        for k in -below..=above {
            if horizontal {
                cells.insert(p.offset(0, k));
            }
            if vertical {
                cells.insert(p.offset(k, 0));
            }
        }
    }
    cells
}

/// Every cell a routed net occupies, per layer, clipped to the grid.
pub fn net_cells(l: &Layout, net: &str) -> BTreeSet<Cell> {
    let Some(route) = l.nets.get(net) else {
        return BTreeSet::new();
    };
    route
        .wires
        .iter()
        .flat_map(|w| wire_footprint(w).into_iter().map(move |p| Cell { layer: w.layer, p }))
        .filter(|c| l.grid.contains(c.p))
        .collect()
}

/// Pin cells of every placed device, on layer 1.
fn all_pin_points(l: &Layout) -> HashSet<Point> {
    let mut pins = HashSet::new();
    for p in l.placements.values() {
        pins.extend(p.pins.keys().filter_map(|pin| p.pin_position(pin)));
    }
    pins
}

fn soft_around(grid: &mut RoutingGrid, cells: &BTreeSet<Cell>) {
    let adjacency = grid.cost.adjacency;
    for c in cells {
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let n = Cell {
                layer: c.layer,
                p: c.p.offset(dx, dy),
            };
            if !cells.contains(&n) {
                grid.add_soft(n, adjacency);
            }
        }
    }
}

/// The net-agnostic grid: device bodies blocked on layer 1 except pin cells,
/// and every existing wire blocked on its own layer.
pub fn build_grid(l: &Layout) -> RoutingGrid {
    let mut grid = RoutingGrid::new(l.grid.width, l.grid.height, 2, CostModel::standard());
    let pins = all_pin_points(l);
    for p in l.placements.values() {
        for cell in p.rect().cells() {
            if !pins.contains(&cell) {
                grid.block(Cell { layer: 1, p: cell });
            }
        }
    }
    for net in l.nets.keys() {
        let cells = net_cells(l, net);
        for c in &cells {
            grid.block(*c);
        }
        soft_around(&mut grid, &cells);
    }
    grid
}

/// Cells within distance `< s` of any of `cells` along `dir`, on both layers.
fn spacing_halo(
    grid: &mut RoutingGrid,
    cells: impl IntoIterator<Item = Point>,
    s: i64,
    dir: SpacingDirection,
) {
    if s <= 0 {
        return;
    }
    let r = s - 1;
    for c in cells {
        let (rx, ry) = match dir {
            SpacingDirection::Horizontal => (r, 0),
            SpacingDirection::Vertical => (0, r),
            SpacingDirection::Both => (r, r),
        };
        for dy in -ry..=ry {
            for dx in -rx..=rx {
                for layer in 1..=grid.layers {
                    grid.block(Cell {
                        layer,
                        p: c.offset(dx, dy),
                    });
                }
            }
        }
    }
}

/// The grid seen while routing `net`: its own wires and pins are free,
/// foreign pins are blocked on both layers, and spacing rules that mention the net add
/// halos around the protected objects.
pub fn build_grid_for(l: &Layout, net: &str) -> RoutingGrid {
    let mut grid = RoutingGrid::new(l.grid.width, l.grid.height, 2, CostModel::standard());
    let own_pins: HashSet<Point> = l.net_pins(net).into_iter().collect();
    for p in l.placements.values() {
        for cell in p.rect().cells() {
            if !own_pins.contains(&cell) {
                grid.block(Cell { layer: 1, p: cell });
            }
        }
    }
    // Keep the via above every foreign pin open for its own net.
    for pin in all_pin_points(l).into_iter().filter(|p| !own_pins.contains(p)) {
        grid.block(Cell { layer: 2, p: pin });
    }
    for other in l.nets.keys().filter(|n| n.as_str() != net) {
        let cells = net_cells(l, other);
        for c in &cells {
            grid.block(*c);
        }
        soft_around(&mut grid, &cells);
    }
    for rule in &l.spacing_rules {
        let partner = if rule.subject.net == net {
            Some(&rule.other)
        } else {
            None
        };
        match partner {
            Some(SpacingTarget::Wire(w)) if w.net != net => {
                let cells: Vec<Point> = net_cells(l, &w.net).into_iter().map(|c| c.p).collect();
                spacing_halo(&mut grid, cells, rule.min_space, rule.direction);
            }
            Some(SpacingTarget::Device(d)) => {
                if let Some(p) = l.placements.get(d) {
                    let cells: Vec<Point> = p.rect().cells().collect();
                    spacing_halo(&mut grid, cells, rule.min_space, rule.direction);
                }
            }
            _ => {}
        }
        // Wire rules bind both nets.
        if let SpacingTarget::Wire(w) = &rule.other {
            if w.net == net && rule.subject.net != net {
                let cells: Vec<Point> = net_cells(l, &rule.subject.net).into_iter().map(|c| c.p).collect();
                spacing_halo(&mut grid, cells, rule.min_space, rule.direction);
            }
        }
    }
    grid
}
