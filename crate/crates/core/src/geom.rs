//! Integer grid geometry shared by the placement and routing engines.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A cell coordinate on the layout grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Point {
    pub x: i64,
    pub y: i64,
}

impl Point {
    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: Point) -> i64 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    pub fn offset(self, dx: i64, dy: i64) -> Point {
        Point::new(self.x + dx, self.y + dy)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Half-open rectangle of cells: `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl Rect {
    pub fn from_origin(origin: Point, w: i64, h: i64) -> Self {
        Self {
            x0: origin.x,
            y0: origin.y,
            x1: origin.x + w,
            y1: origin.y + h,
        }
    }

    pub fn width(&self) -> i64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> i64 {
        self.y1 - self.y0
    }

    pub fn overlaps(&self, other: &Rect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x0 && p.x < self.x1 && p.y >= self.y0 && p.y < self.y1
    }

    pub fn translate(&self, dx: i64, dy: i64) -> Rect {
        Rect {
            x0: self.x0 + dx,
            y0: self.y0 + dy,
            x1: self.x1 + dx,
            y1: self.y1 + dy,
        }
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = Point> + '_ {
        (self.y0..self.y1).flat_map(move |y| (self.x0..self.x1).map(move |x| Point::new(x, y)))
    }
}

/// Device orientation. Only the four axis-preserving variants are supported, so
/// the body footprint `(w, h)` is unchanged by orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub enum Orientation {
    #[default]
    R0,
    /// Mirrored across the x axis (y flipped).
    MX,
    /// Mirrored across the y axis (x flipped).
    MY,
    R180,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [
        Orientation::R0,
        Orientation::MX,
        Orientation::MY,
        Orientation::R180,
    ];

    /// Maps a pin offset given in the unrotated frame into this orientation.
    pub fn apply(self, offset: Point, w: i64, h: i64) -> Point {
        match self {
            Orientation::R0 => offset,
            Orientation::MX => Point::new(offset.x, h - 1 - offset.y),
            Orientation::MY => Point::new(w - 1 - offset.x, offset.y),
            Orientation::R180 => Point::new(w - 1 - offset.x, h - 1 - offset.y),
        }
    }

    /// The orientation obtained by additionally mirroring about a vertical axis.
    pub fn flip_horizontal(self) -> Orientation {
        match self {
            Orientation::R0 => Orientation::MY,
            Orientation::MY => Orientation::R0,
            Orientation::MX => Orientation::R180,
            Orientation::R180 => Orientation::MX,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::R0 => "R0",
            Orientation::MX => "MX",
            Orientation::MY => "MY",
            Orientation::R180 => "R180",
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Orientation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "R0" => Ok(Orientation::R0),
            "MX" => Ok(Orientation::MX),
            "MY" => Ok(Orientation::MY),
            "R180" => Ok(Orientation::R180),
            other => Err(format!("unknown orientation `{other}`")),
        }
    }
}
