//! Canonical JSON snapshots. Keys are sorted, so structurally equal layouts
//! serialize to identical bytes.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    ArrayGroup, GridSpec, Layout, LayoutError, NetRoute, Placement, SpacingRule, SymPair, Wire,
    WireRef,
};
use crate::geom::{Orientation, Point};
use crate::netlist::Netlist;

pub const SNAPSHOT_FORMAT: &str = "layoutpilot.snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;

type Xy = [i64; 2];

fn xy(p: Point) -> Xy {
    [p.x, p.y]
}

fn pt(v: Xy) -> Point {
    Point::new(v[0], v[1])
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Doc {
    format: String,
    version: u32,
    netlist: String,
    grid: GridSpec,
    placements: BTreeMap<String, PlacementDoc>,
    nets: BTreeMap<String, NetDoc>,
    sym_pairs: Vec<SymPair>,
    array_groups: BTreeMap<String, ArrayGroup>,
    priorities: BTreeMap<String, i64>,
    topology_guides: BTreeMap<String, Vec<Xy>>,
    spacing_rules: Vec<SpacingRule>,
    width_overrides: Vec<WidthDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlacementDoc {
    origin: Xy,
    w: i64,
    h: i64,
    orientation: Orientation,
    pins: BTreeMap<String, Xy>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetDoc {
    routed: bool,
    stale: bool,
    wires: Vec<WireDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireDoc {
    id: u32,
    layer: u8,
    width: i64,
    path: Vec<Xy>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WidthDoc {
    net: String,
    wire: u32,
    width: i64,
}

pub(super) fn to_snapshot(l: &Layout) -> String {
    let doc = Doc {
        format: SNAPSHOT_FORMAT.to_string(),
        version: SNAPSHOT_VERSION,
        netlist: l.netlist().name.clone(),
        grid: l.grid,
        placements: l
            .placements
            .iter()
            .map(|(n, p)| {
                (
                    n.clone(),
                    PlacementDoc {
                        origin: xy(p.origin),
                        w: p.w,
                        h: p.h,
                        orientation: p.orientation,
                        pins: p.pins.iter().map(|(k, v)| (k.clone(), xy(*v))).collect(),
                    },
                )
            })
            .collect(),
        nets: l
            .nets
            .iter()
            .map(|(n, r)| {
                (
                    n.clone(),
                    NetDoc {
                        routed: r.routed,
                        stale: r.stale,
                        wires: r
                            .wires
                            .iter()
                            .map(|w| WireDoc {
                                id: w.id,
                                layer: w.layer,
                                width: w.width,
                                path: w.path.iter().copied().map(xy).collect(),
                            })
                            .collect(),
                    },
                )
            })
            .collect(),
        sym_pairs: l.sym_pairs.clone(),
        array_groups: l.array_groups.clone(),
        priorities: l.priorities.clone(),
        topology_guides: l
            .topology_guides
            .iter()
            .map(|(n, g)| (n.clone(), g.iter().copied().map(xy).collect()))
            .collect(),
        spacing_rules: l.spacing_rules.clone(),
        width_overrides: l
            .width_overrides
            .iter()
            .map(|(r, w)| WidthDoc {
                net: r.net.clone(),
                wire: r.wire,
                width: *w,
            })
            .collect(),
    };
    // Going through `Value` sorts every object's keys.
    let value = serde_json::to_value(&doc).expect("snapshot document is always serializable");
    let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
    text.push('\n');
    text
}

pub(super) fn from_snapshot(netlist: Arc<Netlist>, text: &str) -> Result<Layout, LayoutError> {
    let bad = |m: String| LayoutError::Snapshot(m);
    let doc: Doc = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    if doc.format != SNAPSHOT_FORMAT || doc.version != SNAPSHOT_VERSION {
        return Err(bad(format!("unsupported format {} v{}", doc.format, doc.version)));
    }
    if doc.netlist != netlist.name {
        return Err(bad(format!(
            "snapshot is for netlist `{}`, not `{}`",
            doc.netlist, netlist.name
        )));
    }
    if doc.grid.width < 1 || doc.grid.height < 1 || doc.grid.cell_pitch < 1 {
        return Err(bad("grid dimensions must be at least 1".into()));
    }
    let mut l = Layout::empty(netlist, doc.grid);
    for (name, p) in doc.placements {
        l.placements.insert(
            name,
            Placement {
                origin: pt(p.origin),
                w: p.w,
                h: p.h,
                orientation: p.orientation,
                pins: p.pins.into_iter().map(|(k, v)| (k, pt(v))).collect(),
            },
        );
    }
    if doc.nets.len() != l.nets.len() || doc.nets.keys().any(|n| !l.nets.contains_key(n)) {
        return Err(bad("net set does not match the netlist".into()));
    }
    for (name, n) in doc.nets {
        let mut route = NetRoute::new(&name);
        route.routed = n.routed;
        route.stale = n.stale;
        for w in n.wires {
            if w.path.is_empty() || !(1..=2).contains(&w.layer) || w.width < 1 {
                return Err(bad(format!("malformed wire{} of {name}", w.id)));
            }
            let path: Vec<Point> = w.path.into_iter().map(pt).collect();
            if path.windows(2).any(|s| s[0].manhattan(s[1]) != 1)
                || path.iter().any(|p| !l.grid.contains(*p))
            {
                return Err(bad(format!("wire{} of {name} is not a grid chain", w.id)));
            }
            route.wires.push(Wire {
                id: w.id,
                path,
                layer: w.layer,
                width: w.width,
            });
        }
        l.nets.insert(name, route);
    }
    for p in &doc.sym_pairs {
        for d in [&p.a, &p.b] {
            if !l.placements.contains_key(d) {
                return Err(LayoutError::UnknownDevice(d.clone()));
            }
        }
    }
    l.sym_pairs = doc.sym_pairs;
    for (id, g) in &doc.array_groups {
        if id != &g.id || (g.rows as u64 * g.cols as u64) < g.members.len() as u64 {
            return Err(bad(format!("malformed array group `{id}`")));
        }
        if let Some(m) = g.members.iter().find(|m| !l.placements.contains_key(*m)) {
            return Err(LayoutError::UnknownDevice(m.clone()));
        }
    }
    l.array_groups = doc.array_groups;
    l.priorities = doc.priorities;
    for (net, guides) in doc.topology_guides {
        if !l.netlist().has_net(&net) {
            return Err(bad(format!("guides for unknown net `{net}`")));
        }
        l.topology_guides.insert(net, guides.into_iter().map(pt).collect());
    }
    if let Some(net) = l.priorities.keys().find(|n| !l.netlist().has_net(n)) {
        return Err(bad(format!("priority for unknown net `{net}`")));
    }
    l.spacing_rules = doc.spacing_rules;
    for w in doc.width_overrides {
        if w.width < 1 {
            return Err(bad(format!("width override below 1 on {}", w.net)));
        }
        l.width_overrides.insert(WireRef::new(w.net, w.wire), w.width);
    }
    l.check_geometry()?;
    if !l.membership_violations().is_empty() {
        return Err(bad("device appears in more than one constraint group".into()));
    }
    Ok(l)
}

/// Lowercase hex SHA-256 of a snapshot document.
pub fn snapshot_hash(snapshot: &str) -> String {
    hex::encode(Sha256::digest(snapshot.as_bytes()))
}
