use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use super::grid::{Cell, RoutingGrid};
use crate::geom::Point;

/// Admissible distance estimate to a target set.
enum Heuristic {
    Exact(Vec<Point>),
    /// Distance to the target bounding box; used for large target sets.
    Box { x0: i64, y0: i64, x1: i64, y1: i64 },
}

const EXACT_TARGET_LIMIT: usize = 64;

impl Heuristic {
    fn new(targets: &BTreeSet<Cell>) -> Heuristic {
        if targets.len() <= EXACT_TARGET_LIMIT {
            let mut pts: Vec<Point> = targets.iter().map(|c| c.p).collect();
            pts.dedup();
            Heuristic::Exact(pts)
        } else {
            let mut h = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
            for c in targets {
                h = (h.0.min(c.p.x), h.1.min(c.p.y), h.2.max(c.p.x), h.3.max(c.p.y));
            }
            Heuristic::Box {
                x0: h.0,
                y0: h.1,
                x1: h.2,
                y1: h.3,
            }
        }
    }

    fn eval(&self, p: Point) -> i64 {
        match self {
            Heuristic::Exact(pts) => pts.iter().map(|t| t.manhattan(p)).min().unwrap_or(0),
            Heuristic::Box { x0, y0, x1, y1 } => {
                let dx = (x0 - p.x).max(0).max(p.x - x1);
                let dy = (y0 - p.y).max(0).max(p.y - y1);
                dx + dy
            }
        }
    }
}

/// A found path and its total cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathResult {
    pub cells: Vec<Cell>,
    pub cost: i64,
}

/// Cost of stepping from `a` into the adjacent cell `b`.
pub fn step_cost(g: &RoutingGrid, a: Cell, b: Cell) -> i64 {
    let base = if a.layer != b.layer {
        g.cost.via
    } else {
        let horizontal = a.p.y == b.p.y;
        let preferred = (b.layer == 1) == horizontal;
        1 + if preferred { 0 } else { g.cost.off_direction }
    };
    base + g.soft_cost(b)
}

pub fn neighbors(g: &RoutingGrid, c: Cell) -> impl Iterator<Item = Cell> + '_ {
    let planar = [(1, 0), (-1, 0), (0, 1), (0, -1)].into_iter().map(move |(dx, dy)| Cell {
        layer: c.layer,
        p: c.p.offset(dx, dy),
    });
    let via = (1..=g.layers).filter(move |&l| l != c.layer).map(move |layer| Cell { layer, p: c.p });
    planar.chain(via).filter(move |n| g.is_free(*n))
}

/// Minimum-cost path from any source to any target. Ties in the open list
/// break by smaller estimate, then lower y, lower x, lower layer.
pub fn astar_path(
    g: &RoutingGrid,
    sources: &[Cell],
    targets: &BTreeSet<Cell>,
) -> Option<PathResult> {
    let targets: BTreeSet<Cell> = targets.iter().copied().filter(|c| g.is_free(*c)).collect();
    if targets.is_empty() {
        return None;
    }
    let h = Heuristic::new(&targets);
    let mut best: HashMap<Cell, i64> = HashMap::new();
    let mut parent: HashMap<Cell, Cell> = HashMap::new();
    let mut open = BinaryHeap::new();
    let mut srcs: Vec<Cell> = sources.iter().copied().filter(|c| g.is_free(*c)).collect();
    srcs.sort();
    srcs.dedup();
    for s in srcs {
        best.insert(s, 0);
        let hs = h.eval(s.p);
        open.push(Reverse((hs, hs, s.p.y, s.p.x, s.layer, 0i64)));
    }
    while let Some(Reverse((_, _, y, x, layer, gc))) = open.pop() {
        let cur = Cell::new(layer, x, y);
        if best.get(&cur).is_some_and(|&b| b < gc) {
            continue;
        }
        if targets.contains(&cur) {
            let mut cells = vec![cur];
            let mut at = cur;
            while let Some(&p) = parent.get(&at) {
                cells.push(p);
                at = p;
            }
            cells.reverse();
            return Some(PathResult { cells, cost: gc });
        }
        for n in neighbors(g, cur) {
            let ng = gc + step_cost(g, cur, n);
            if best.get(&n).is_none_or(|&b| ng < b) {
                best.insert(n, ng);
                parent.insert(n, cur);
                let hn = h.eval(n.p);
                open.push(Reverse((ng + hn, hn, n.p.y, n.p.x, n.layer, ng)));
            }
        }
    }
    None
}

/// Cells within Manhattan distance `radius` of `center`, on every layer.
pub fn snap_disk(g: &RoutingGrid, center: Point, radius: i64) -> BTreeSet<Cell> {
    let mut out = BTreeSet::new();
    for dy in -radius..=radius {
        let span = radius - dy.abs();
        for dx in -span..=span {
            for layer in 1..=g.layers {
                let c = Cell {
                    layer,
                    p: center.offset(dx, dy),
                };
                if g.is_free(c) {
                    out.insert(c);
                }
            }
        }
    }
    out
}

/// A search from sources to targets that passes near each waypoint in order.
#[derive(Debug, Clone, Default)]
pub struct PathQuery {
    pub sources: Vec<Cell>,
    pub targets: BTreeSet<Cell>,
    pub waypoints: Vec<Point>,
    pub snap_radius: i64,
}

/// Chains sub-searches source -> waypoint disks -> targets.
pub fn astar_query(g: &RoutingGrid, q: &PathQuery) -> Option<PathResult> {
    let mut cells: Vec<Cell> = Vec::new();
    let mut cost = 0;
    let mut from: Vec<Cell> = q.sources.clone();
    for wp in &q.waypoints {
        let disk = snap_disk(g, *wp, q.snap_radius);
        let leg = astar_path(g, &from, &disk)?;
        let end = *leg.cells.last().expect("non-empty path");
        extend(&mut cells, leg.cells);
        cost += leg.cost;
        from = vec![end];
    }
    let leg = astar_path(g, &from, &q.targets)?;
    extend(&mut cells, leg.cells);
    cost += leg.cost;
    Some(PathResult { cells, cost })
}

fn extend(into: &mut Vec<Cell>, leg: Vec<Cell>) {
    let skip = usize::from(into.last().is_some() && into.last() == leg.first());
    into.extend(leg.into_iter().skip(skip));
}

#[cfg(test)]
mod tests {
    use super::super::grid::CostModel;
    use super::*;

    #[test]
    fn open_grid_path_is_manhattan() {
        let g = RoutingGrid::new(5, 5, 1, CostModel::uniform());
        let r = astar_path(&g, &[Cell::new(1, 0, 0)], &[Cell::new(1, 4, 4)].into()).unwrap();
        assert_eq!(r.cost, 8);
        assert_eq!(r.cells.len(), 9);
        assert!(r.cells.windows(2).all(|w| w[0].p.manhattan(w[1].p) == 1));
    }

    #[test]
    fn walled_target_is_unroutable() {
        let mut g = RoutingGrid::new(5, 5, 1, CostModel::uniform());
        for c in [(3, 4), (4, 3), (3, 3)] {
            g.block(Cell::new(1, c.0, c.1));
        }
        assert!(astar_path(&g, &[Cell::new(1, 0, 0)], &[Cell::new(1, 4, 4)].into()).is_none());
    }

    #[test]
    fn preferred_direction_uses_layer_two_for_long_vertical_runs() {
        let g = RoutingGrid::new(3, 30, 2, CostModel::standard());
        let r = astar_path(&g, &[Cell::new(1, 1, 0)], &[Cell::new(1, 1, 29)].into()).unwrap();
        // Two vias (6) plus 29 preferred steps beats 58 off-direction cost.
        assert_eq!(r.cost, 29 + 6);
        assert!(r.cells.iter().any(|c| c.layer == 2));
    }

    #[test]
    fn waypoints_are_visited_in_order() {
        let g = RoutingGrid::new(20, 20, 1, CostModel::uniform());
        let q = PathQuery {
            sources: vec![Cell::new(1, 0, 0)],
            targets: [Cell::new(1, 19, 0)].into(),
            waypoints: vec![Point::new(5, 15), Point::new(15, 15)],
            snap_radius: 2,
        };
        let r = astar_query(&g, &q).unwrap();
        let first = r.cells.iter().position(|c| c.p.manhattan(Point::new(5, 15)) <= 2).unwrap();
        let second = r.cells.iter().position(|c| c.p.manhattan(Point::new(15, 15)) <= 2).unwrap();
        assert!(first < second);
        assert!(r.cells.windows(2).all(|w| w[0].p.manhattan(w[1].p) == 1));
    }
}
