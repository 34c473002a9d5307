//! Drawing geometry for a layout: device rectangles, wire polylines and
//! symmetry axes.

use layoutpilot_core::geom::Orientation;
use layoutpilot_core::layout::Layout;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceRect {
    pub name: String,
    pub kind: String,
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
    pub orientation: Orientation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WirePolyline {
    pub net: String,
    pub id: u32,
    pub layer: u8,
    pub width: i64,
    pub points: Vec<[i64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymAxis {
    pub a: String,
    pub b: String,
    pub axis2: i64,
    /// Axis position in grid units; may fall between cells.
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Render {
    pub width: i64,
    pub height: i64,
    pub devices: Vec<DeviceRect>,
    pub wires: Vec<WirePolyline>,
    pub sym_axes: Vec<SymAxis>,
}

/// Collapses collinear runs so each polyline keeps only its corners.
fn corners(path: &[layoutpilot_core::geom::Point]) -> Vec<[i64; 2]> {
    let mut out: Vec<[i64; 2]> = Vec::new();
    for (i, p) in path.iter().enumerate() {
        if i > 0 && i + 1 < path.len() {
            let (a, c) = (path[i - 1], path[i + 1]);
            if (a.x == p.x && p.x == c.x) || (a.y == p.y && p.y == c.y) {
                continue;
            }
        }
        out.push([p.x, p.y]);
    }
    out
}

pub fn render(l: &Layout) -> Render {
    let devices = l
        .placements
        .iter()
        .map(|(name, p)| DeviceRect {
            name: name.clone(),
            kind: l
                .netlist()
                .device(name)
                .map(|d| d.kind.as_str().to_string())
                .unwrap_or_default(),
            x: p.origin.x,
            y: p.origin.y,
            w: p.w,
            h: p.h,
            orientation: p.orientation,
        })
        .collect();
    let wires = l
        .nets
        .values()
        .flat_map(|r| {
            r.wires.iter().map(|w| WirePolyline {
                net: r.net.clone(),
                id: w.id,
                layer: w.layer,
                width: w.width,
                points: corners(&w.path),
            })
        })
        .collect();
    let sym_axes = l
        .sym_pairs
        .iter()
        .map(|s| SymAxis {
            a: s.a.clone(),
            b: s.b.clone(),
            axis2: s.axis2,
            x: s.axis2 as f64 / 2.0,
        })
        .collect();
    Render {
        width: l.grid.width,
        height: l.grid.height,
        devices,
        wires,
        sym_axes,
    }
}

#[cfg(test)]
mod tests {
    use layoutpilot_core::fixtures::ota_layout;
    use layoutpilot_core::geom::Point;

    use super::*;

    #[test]
    fn straight_runs_collapse_to_corners() {
        let path: Vec<Point> = [(0, 0), (1, 0), (2, 0), (2, 1), (2, 2)]
            .iter()
            .map(|&(x, y)| Point::new(x, y))
            .collect();
        assert_eq!(corners(&path), [[0, 0], [2, 0], [2, 2]]);
        assert_eq!(corners(&path[..1]), [[0, 0]]);
    }

    #[test]
    fn every_device_is_drawn() {
        let l = ota_layout();
        let r = render(&l);
        assert_eq!(r.devices.len(), l.placements.len());
        assert!(r.wires.is_empty() && r.sym_axes.is_empty());
    }
}
