//! Placement text: one `<device> <x> <y> <w> <h> <orient>` line per device,
//! with an optional leading `grid <width> <height> [pitch]` line.

use std::fmt::Write as _;

use super::{GridSpec, LayoutError};
use crate::geom::{Orientation, Point};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacementLine {
    pub device: String,
    pub origin: Point,
    pub w: i64,
    pub h: i64,
    pub orientation: Orientation,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PlacementText {
    pub grid: Option<GridSpec>,
    pub lines: Vec<PlacementLine>,
}

fn syntax(line: usize, reason: impl Into<String>) -> LayoutError {
    LayoutError::Syntax {
        line,
        reason: reason.into(),
    }
}

fn int(line: usize, tok: &str, what: &str) -> Result<i64, LayoutError> {
    tok.parse::<i64>()
        .map_err(|_| syntax(line, format!("{what} `{tok}` is not an integer")))
}

pub fn parse_placement_text(text: &str) -> Result<PlacementText, LayoutError> {
    let mut out = PlacementText::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        if toks[0] == "grid" {
            if out.grid.is_some() || !out.lines.is_empty() {
                return Err(syntax(line_no, "`grid` must be the first card and appear once"));
            }
            if !(3..=4).contains(&toks.len()) {
                return Err(syntax(line_no, "expected `grid <width> <height> [pitch]`"));
            }
            let width = int(line_no, toks[1], "width")?;
            let height = int(line_no, toks[2], "height")?;
            let cell_pitch = match toks.get(3) {
                Some(t) => t
                    .parse::<u32>()
                    .map_err(|_| syntax(line_no, format!("pitch `{t}` is not a positive integer")))?,
                None => 1,
            };
            if width < 1 || height < 1 || cell_pitch < 1 {
                return Err(syntax(line_no, "grid dimensions must be at least 1"));
            }
            out.grid = Some(GridSpec {
                width,
                height,
                cell_pitch,
            });
            continue;
        }
        if toks.len() != 6 {
            return Err(syntax(
                line_no,
                format!("expected 6 fields `<device> <x> <y> <w> <h> <orient>`, got {}", toks.len()),
            ));
        }
        let x = int(line_no, toks[1], "x")?;
        let y = int(line_no, toks[2], "y")?;
        let w = int(line_no, toks[3], "w")?;
        let h = int(line_no, toks[4], "h")?;
        if w < 1 || h < 1 {
            return Err(syntax(line_no, "device size must be at least 1x1"));
        }
        let orientation = toks[5].parse().map_err(|e: String| syntax(line_no, e))?;
        out.lines.push(PlacementLine {
            device: toks[0].to_string(),
            origin: Point::new(x, y),
            w,
            h,
            orientation,
        });
    }
    Ok(out)
}

/// Writes placement text for a layout, grid line first, devices in name order.
pub fn format_placement_text(layout: &super::Layout) -> String {
    let g = layout.grid;
    let mut out = format!("grid {} {} {}\n", g.width, g.height, g.cell_pitch);
    for (name, p) in &layout.placements {
        let _ = writeln!(
            out,
            "{name} {} {} {} {} {}",
            p.origin.x, p.origin.y, p.w, p.h, p.orientation
        );
    }
    out
}
