//! Placement commands and the greedy legalizer.
//!
//! Every operation works on a clone and commits only on success, so a failed
//! command leaves the layout untouched.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::geom::{Point, Rect};
use crate::layout::{ArrayGroup, Layout, SymPair};

/// Upper bound on repair/shift rounds in one legalization.
pub const MAX_LEGALIZE_ITERATIONS: u32 = 100;

/// Default lattice spacing for a new array group, in cells.
pub const DEFAULT_ARRAY_SPACING: i64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlacementError {
    #[error("unknown or unplaced device `{0}`")]
    UnknownDevice(String),
    #[error("`{0}` would fall outside the grid")]
    OutOfBounds(String),
    #[error("device `{0}` already belongs to another symmetry pair")]
    SymConflict(String),
    #[error("`{0}` and `{1}` cannot mirror on integer cells (width parity differs or axis misaligned)")]
    SymParity(String, String),
    #[error("device `{0}` already belongs to an array group")]
    ArrayConflict(String),
    #[error("array shape {rows}x{cols} cannot hold {members} devices")]
    ShapeTooSmall { rows: u32, cols: u32, members: usize },
    #[error("array group needs at least one device")]
    EmptyArray,
    #[error("unknown array group `{0}`")]
    UnknownGroup(String),
    #[error("array group `{0}` already exists")]
    DuplicateGroup(String),
    #[error("negative spacing {0}")]
    NegativeSpacing(i64),
    #[error("no legal position for `{0}`")]
    Unplaceable(String),
    #[error("constraints on `{0}` cannot be satisfied together")]
    ConstraintConflict(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Moved {
    pub device: String,
    pub from: Point,
    pub to: Point,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LegalizeReport {
    /// Devices whose origin changed, name-ordered.
    pub moved: Vec<Moved>,
    pub iterations: u32,
    pub warnings: Vec<String>,
    /// Group id created by `array_add`.
    pub group: Option<String>,
}

impl LegalizeReport {
    pub fn moved_devices(&self) -> Vec<&str> {
        self.moved.iter().map(|m| m.device.as_str()).collect()
    }
}

/// Runs `op` on a copy of `l`, legalizes, and commits on success.
fn transact(
    l: &mut Layout,
    op: impl FnOnce(&mut Layout, &mut Vec<String>) -> Result<BTreeSet<String>, PlacementError>,
) -> Result<LegalizeReport, PlacementError> {
    let mut work = l.clone();
    let mut warnings = Vec::new();
    let anchors = op(&mut work, &mut warnings)?;
    let iterations = legalize_in_place(&mut work, &anchors, &mut warnings)?;
    let moved: Vec<Moved> = work
        .placements
        .iter()
        .filter_map(|(name, p)| {
            let old = l.placements.get(name)?.origin;
            (old != p.origin).then(|| Moved {
                device: name.clone(),
                from: old,
                to: p.origin,
            })
        })
        .collect();
    let touched: Vec<String> = work
        .placements
        .iter()
        .filter(|(name, p)| l.placements.get(*name) != Some(*p))
        .map(|(name, _)| name.clone())
        .collect();
    work.mark_stale_for_devices(touched.iter().map(String::as_str));
    *l = work;
    Ok(LegalizeReport {
        moved,
        iterations,
        warnings,
        group: None,
    })
}

fn require_placed(l: &Layout, device: &str) -> Result<(), PlacementError> {
    if l.placements.contains_key(device) {
        Ok(())
    } else {
        Err(PlacementError::UnknownDevice(device.to_string()))
    }
}

/// Removes `device` from whatever array group holds it. Empty groups vanish.
fn drop_from_array(l: &mut Layout, device: &str, warnings: &mut Vec<String>) {
    let Some(id) = l.array_group_of(device).map(|g| g.id.clone()) else {
        return;
    };
    let group = l.array_groups.get_mut(&id).expect("group exists");
    group.members.retain(|m| m != device);
    warnings.push(format!("`{device}` left array group `{id}`"));
    if group.members.is_empty() {
        l.array_groups.remove(&id);
    }
}

pub fn device_move(l: &mut Layout, device: &str, x: i64, y: i64) -> Result<LegalizeReport, PlacementError> {
    require_placed(l, device)?;
    let p = &l.placements[device];
    let target = Rect::from_origin(Point::new(x, y), p.w, p.h);
    if !l.grid.contains_rect(&target) {
        return Err(PlacementError::OutOfBounds(device.to_string()));
    }
    if p.origin == Point::new(x, y) {
        return Ok(LegalizeReport::default());
    }
    transact(l, |w, warnings| {
        drop_from_array(w, device, warnings);
        w.placements.get_mut(device).expect("placed").origin = Point::new(x, y);
        // A self-symmetric device carries its axis along.
        for pair in w.sym_pairs.iter_mut().filter(|p| p.is_self() && p.a == device) {
            pair.axis2 = w.placements[device].center2();
        }
        Ok([device.to_string()].into())
    })
}

pub fn device_swap(l: &mut Layout, a: &str, b: &str) -> Result<LegalizeReport, PlacementError> {
    require_placed(l, a)?;
    require_placed(l, b)?;
    if a == b {
        return Ok(LegalizeReport::default());
    }
    transact(l, |w, _| {
        let pa = w.placements[a].origin;
        let pb = w.placements[b].origin;
        w.placements.get_mut(a).expect("placed").origin = pb;
        w.placements.get_mut(b).expect("placed").origin = pa;
        // Lattice slots travel with the position.
        for g in w.array_groups.values_mut() {
            for m in g.members.iter_mut() {
                if m == a {
                    *m = b.to_string();
                } else if m == b {
                    *m = a.to_string();
                }
            }
        }
        for pair in w.sym_pairs.iter_mut().filter(|p| p.is_self()) {
            if pair.a == a || pair.a == b {
                pair.axis2 = w.placements[&pair.a].center2();
            }
        }
        Ok([a.to_string(), b.to_string()].into())
    })
}

pub fn sym_add(
    l: &mut Layout,
    a: &str,
    b: &str,
    axis2: Option<i64>,
) -> Result<LegalizeReport, PlacementError> {
    require_placed(l, a)?;
    require_placed(l, b)?;
    if let Some(existing) = l.sym_pairs.iter().find(|p| p.same_devices(a, b)) {
        if axis2.is_none() || axis2 == Some(existing.axis2) {
            return Ok(LegalizeReport::default());
        }
    } else {
        for d in [a, b] {
            if l.sym_pair_of(d).is_some() {
                return Err(PlacementError::SymConflict(d.to_string()));
            }
        }
    }
    let pa = &l.placements[a];
    let pb = &l.placements[b];
    let parity = |d: &str| PlacementError::SymParity(a.to_string(), d.to_string());
    let axis2 = if a == b {
        let axis2 = axis2.unwrap_or(pa.center2());
        if (axis2 - pa.w).rem_euclid(2) != 0 {
            return Err(parity(b));
        }
        axis2
    } else {
        if (pa.w - pb.w).rem_euclid(2) != 0 {
            return Err(parity(b));
        }
        axis2.unwrap_or((pa.center2() + pb.center2()) / 2)
    };
    transact(l, |w, _| {
        w.sym_pairs.retain(|p| !p.same_devices(a, b));
        w.sym_pairs.push(SymPair {
            a: a.to_string(),
            b: b.to_string(),
            axis2,
        });
        if a != b {
            let flipped = w.placements[a].orientation.flip_horizontal();
            w.placements.get_mut(b).expect("placed").orientation = flipped;
        }
        Ok([a.to_string()].into())
    })
}

/// Smallest unused `g<n>` id.
pub fn next_group_id(l: &Layout) -> String {
    (1..)
        .map(|n| format!("g{n}"))
        .find(|id| !l.array_groups.contains_key(id))
        .expect("unbounded range")
}

pub fn array_add(
    l: &mut Layout,
    id: Option<&str>,
    devices: &[String],
    rows: u32,
    cols: u32,
) -> Result<LegalizeReport, PlacementError> {
    if devices.is_empty() {
        return Err(PlacementError::EmptyArray);
    }
    if (rows as u64) * (cols as u64) < devices.len() as u64 {
        return Err(PlacementError::ShapeTooSmall {
            rows,
            cols,
            members: devices.len(),
        });
    }
    let mut seen = BTreeSet::new();
    for d in devices {
        require_placed(l, d)?;
        if !seen.insert(d.as_str()) || l.array_group_of(d).is_some() {
            return Err(PlacementError::ArrayConflict(d.clone()));
        }
    }
    let id = match id {
        Some(id) if l.array_groups.contains_key(id) => {
            return Err(PlacementError::DuplicateGroup(id.to_string()))
        }
        Some(id) => id.to_string(),
        None => next_group_id(l),
    };
    let origin = devices
        .iter()
        .map(|d| l.placements[d].rect())
        .reduce(|a, b| a.union(&b))
        .map(|r| Point::new(r.x0, r.y0))
        .expect("non-empty");
    let group_id = id.clone();
    let mut report = transact(l, |w, _| {
        let group = ArrayGroup {
            id: id.clone(),
            members: devices.to_vec(),
            rows,
            cols,
            hspace: DEFAULT_ARRAY_SPACING,
            vspace: DEFAULT_ARRAY_SPACING,
        };
        w.placements
            .get_mut(&devices[0])
            .expect("placed")
            .origin = origin;
        relattice(w, &group);
        w.array_groups.insert(id.clone(), group);
        Ok(devices.iter().cloned().collect())
    })?;
    report.group = Some(group_id);
    Ok(report)
}

pub fn array_space(l: &mut Layout, group: &str, h: i64, v: i64) -> Result<LegalizeReport, PlacementError> {
    let Some(g) = l.array_groups.get(group) else {
        return Err(PlacementError::UnknownGroup(group.to_string()));
    };
    for s in [h, v] {
        if s < 0 {
            return Err(PlacementError::NegativeSpacing(s));
        }
    }
    if g.hspace == h && g.vspace == v {
        return Ok(LegalizeReport::default());
    }
    transact(l, |w, _| {
        let g = w.array_groups.get_mut(group).expect("group exists");
        g.hspace = h;
        g.vspace = v;
        let g = g.clone();
        relattice(w, &g);
        Ok(g.members.iter().cloned().collect())
    })
}

/// Removes overlaps and re-satisfies every constraint.
pub fn legalize(l: &mut Layout) -> Result<LegalizeReport, PlacementError> {
    transact(l, |_, _| Ok(BTreeSet::new()))
}

/// Places every member of `g` on its lattice, anchored at member 0.
fn relattice(l: &mut Layout, g: &ArrayGroup) {
    let Some(origin) = g.members.first().and_then(|m| l.placements.get(m)).map(|p| p.origin) else {
        return;
    };
    let offsets: Vec<Point> = (0..g.members.len()).map(|i| l.lattice_offset(g, i)).collect();
    for (m, off) in g.members.iter().zip(offsets) {
        if let Some(p) = l.placements.get_mut(m) {
            p.origin = origin.offset(off.x, off.y);
        }
    }
}

fn legalize_in_place(
    l: &mut Layout,
    anchors: &BTreeSet<String>,
    warnings: &mut Vec<String>,
) -> Result<u32, PlacementError> {
    for iteration in 1..=MAX_LEGALIZE_ITERATIONS {
        repair(l, anchors, warnings)?;
        let shifted = place_blocks(l, anchors)?;
        if !shifted && l.sym_violations().is_empty() && l.array_violations().is_empty() {
            return Ok(iteration);
        }
    }
    Err(PlacementError::Unplaceable(
        "legalization did not converge".to_string(),
    ))
}

/// How firmly a device is held during repair: array members outrank the
/// devices the command targeted, which outrank everything else.
fn rank(l: &Layout, anchors: &BTreeSet<String>, d: &str) -> u8 {
    if l.array_group_of(d).is_some() {
        2
    } else if anchors.contains(d) {
        1
    } else {
        0
    }
}

fn repair(
    l: &mut Layout,
    anchors: &BTreeSet<String>,
    warnings: &mut Vec<String>,
) -> Result<(), PlacementError> {
    let groups: Vec<ArrayGroup> = l.array_groups.values().cloned().collect();
    for g in &groups {
        relattice(l, g);
    }
    for idx in 0..l.sym_pairs.len() {
        let pair = l.sym_pairs[idx].clone();
        let pa = l.placements.get(&pair.a).cloned().ok_or_else(|| PlacementError::UnknownDevice(pair.a.clone()))?;
        if pair.is_self() {
            if rank(l, anchors, &pair.a) == 2 {
                l.sym_pairs[idx].axis2 = pa.center2();
            } else {
                let x2 = pair.axis2 - pa.w;
                if x2.rem_euclid(2) != 0 {
                    return Err(PlacementError::SymParity(pair.a.clone(), pair.b.clone()));
                }
                l.placements.get_mut(&pair.a).expect("placed").origin.x = x2 / 2;
            }
            continue;
        }
        let pb = l.placements.get(&pair.b).cloned().ok_or_else(|| PlacementError::UnknownDevice(pair.b.clone()))?;
        if (pa.w - pb.w).rem_euclid(2) != 0 {
            return Err(PlacementError::SymParity(pair.a.clone(), pair.b.clone()));
        }
        let ra = rank(l, anchors, &pair.a);
        let mut rb = rank(l, anchors, &pair.b);
        if ra == 2 && rb == 2 {
            if pa.origin.y == pb.origin.y {
                l.sym_pairs[idx].axis2 = (pa.center2() + pb.center2()) / 2;
                continue;
            }
            drop_from_array(l, &pair.b, warnings);
            rb = 0;
        }
        let (keep, mover, keep_rank) = if rb > ra {
            (&pair.b, &pair.a, rb)
        } else {
            (&pair.a, &pair.b, ra)
        };
        let k = l.placements[keep].clone();
        let mw = l.placements[mover].w;
        let c2 = 2 * pair.axis2 - k.center2();
        let m = l.placements.get_mut(mover).expect("placed");
        m.origin = Point::new((c2 - mw) / 2, k.origin.y);
        let mrect = m.rect();
        if mrect.overlaps(&k.rect()) {
            if keep_rank == 2 {
                return Err(PlacementError::ConstraintConflict(keep.clone()));
            }
            // Spread the pair apart about the axis, smaller center on the left.
            let (left, right) = if k.center2() <= pair.axis2 {
                (keep, mover)
            } else {
                (mover, keep)
            };
            let wl = l.placements[left].w;
            let wr = l.placements[right].w;
            let xl = (2 * pair.axis2 - 3 * wl - wr).div_euclid(4);
            let cl2 = 2 * xl + wl;
            let xr = (2 * pair.axis2 - cl2 - wr) / 2;
            l.placements.get_mut(left).expect("placed").origin.x = xl;
            l.placements.get_mut(right).expect("placed").origin.x = xr;
        }
    }
    Ok(())
}

struct Block {
    members: Vec<String>,
    anchored: bool,
}

/// Groups devices that must move rigidly: sym pairs and array groups.
fn blocks(l: &Layout, anchors: &BTreeSet<String>) -> Vec<Block> {
    let names: Vec<&String> = l.placements.keys().collect();
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut parent: Vec<usize> = (0..names.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut union = |a: &str, b: &str| {
        if let (Some(&ia), Some(&ib)) = (index.get(a), index.get(b)) {
            let (ra, rb) = (find(&mut parent, ia), find(&mut parent, ib));
            // Keep the smaller index as root so the leader is the min name.
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    };
    for p in &l.sym_pairs {
        union(&p.a, &p.b);
    }
    for g in l.array_groups.values() {
        for m in &g.members[1..] {
            union(&g.members[0], m);
        }
    }
    let mut by_root: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (i, name) in names.iter().enumerate() {
        let r = find(&mut parent, i);
        by_root.entry(r).or_default().push(name.to_string());
    }
    let mut out: Vec<Block> = by_root
        .into_values()
        .map(|members| Block {
            anchored: members.iter().any(|m| anchors.contains(m)),
            members,
        })
        .collect();
    // Roots are min indices, so map order is leader-name order; anchored first.
    out.sort_by_key(|b| !b.anchored);
    out
}

fn place_blocks(l: &mut Layout, anchors: &BTreeSet<String>) -> Result<bool, PlacementError> {
    let mut placed: Vec<Rect> = Vec::new();
    let mut shifted = false;
    let (gw, gh) = (l.grid.width, l.grid.height);
    for block in blocks(l, anchors) {
        let rects: Vec<Rect> = block.members.iter().map(|m| l.placements[m].rect()).collect();
        for (i, a) in rects.iter().enumerate() {
            if rects[i + 1..].iter().any(|b| a.overlaps(b)) {
                return Err(PlacementError::ConstraintConflict(block.members[i].clone()));
            }
        }
        let bbox = rects.iter().copied().reduce(|a, b| a.union(&b)).expect("non-empty block");
        let free = |dx: i64, dy: i64, placed: &[Rect]| -> Option<i64> {
            // Returns None when the shifted block is clear, else the minimum
            // rightward jump that could clear every current collision.
            let mut jump = None;
            for r in &rects {
                let r = r.translate(dx, dy);
                for p in placed {
                    if r.overlaps(p) {
                        let j = p.x1 - r.x0;
                        jump = Some(jump.map_or(j, |m: i64| m.max(j)));
                    }
                }
            }
            jump
        };
        let in_grid = bbox.x0 >= 0 && bbox.y0 >= 0 && bbox.x1 <= gw && bbox.y1 <= gh;
        if in_grid && free(0, 0, &placed).is_none() {
            placed.extend(rects);
            continue;
        }
        let (bw, bh) = (bbox.width(), bbox.height());
        if bw > gw || bh > gh {
            return Err(PlacementError::Unplaceable(block.members[0].clone()));
        }
        let y_start = bbox.y0.clamp(0, gh - bh);
        let x_start = bbox.x0.clamp(0, gw - bw);
        let rows = (y_start..=gh - bh).chain(0..y_start);
        let mut found = None;
        'search: for y in rows {
            for (lo, hi) in [(x_start, gw - bw), (0, x_start - 1)] {
                let mut x = lo;
                while x <= hi {
                    match free(x - bbox.x0, y - bbox.y0, &placed) {
                        None => {
                            found = Some((x - bbox.x0, y - bbox.y0));
                            break 'search;
                        }
                        Some(j) => x += j.max(1),
                    }
                }
            }
        }
        let Some((dx, dy)) = found else {
            return Err(PlacementError::Unplaceable(block.members[0].clone()));
        };
        for m in &block.members {
            let p = l.placements.get_mut(m).expect("placed");
            p.origin = p.origin.offset(dx, dy);
        }
        for pair in l.sym_pairs.iter_mut().filter(|p| block.members.contains(&p.a)) {
            pair.axis2 += 2 * dx;
        }
        placed.extend(rects.iter().map(|r| r.translate(dx, dy)));
        shifted = true;
    }
    Ok(shifted)
}
