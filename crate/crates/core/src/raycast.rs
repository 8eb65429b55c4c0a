//! Exact grid traversal (Amanatides & Woo) and line-of-sight queries.
//!
//! Every helper here works on an abstract `width x height` grid with square
//! cells of side `resolution` whose cell (0,0) starts at `origin`. Callers
//! supply the blocking predicate, so the same code serves the agent's
//! occupancy map and the simulator's ground-truth walls.

use crate::geometry::{Point, Pose};

/// Geometry of a regular grid in world space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridFrame {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: Point,
}

impl GridFrame {
    pub fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        let fx = (p.x - self.origin.x) / self.resolution;
        let fy = (p.y - self.origin.y) / self.resolution;
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let (c, r) = (fx.floor() as usize, fy.floor() as usize);
        (c < self.width && r < self.height).then_some((c, r))
    }

    pub fn center(&self, col: usize, row: usize) -> Point {
        Point::new(
            self.origin.x + (col as f64 + 0.5) * self.resolution,
            self.origin.y + (row as f64 + 0.5) * self.resolution,
        )
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One cell crossed by a ray, with the distances at which the ray enters
/// and leaves it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellCrossing {
    pub col: usize,
    pub row: usize,
    pub enter: f64,
    pub exit: f64,
}

/// Iterator over the cells a ray passes through, in order, until it leaves
/// the grid or travels past `max_dist`.
pub struct RayWalk {
    frame: GridFrame,
    col: i64,
    row: i64,
    step_c: i64,
    step_r: i64,
    next_x: f64,
    next_y: f64,
    delta_x: f64,
    delta_y: f64,
    t: f64,
    max_dist: f64,
    done: bool,
}

impl RayWalk {
    pub fn new(frame: GridFrame, start: Point, heading: f64, max_dist: f64) -> Self {
        Self::along(frame, start, (heading.cos(), heading.sin()), max_dist)
    }

    /// Same as [`RayWalk::new`] with the direction given as a unit vector.
    pub fn along(frame: GridFrame, start: Point, (dx, dy): (f64, f64), max_dist: f64) -> Self {
        let gx = (start.x - frame.origin.x) / frame.resolution;
        let gy = (start.y - frame.origin.y) / frame.resolution;
        let col = gx.floor() as i64;
        let row = gy.floor() as i64;
        let res = frame.resolution;
        let axis = |g: f64, cell: i64, d: f64| -> (i64, f64, f64) {
            if d > 1e-12 {
                (1, ((cell + 1) as f64 - g) * res / d, res / d)
            } else if d < -1e-12 {
                (-1, (g - cell as f64) * res / -d, res / -d)
            } else {
                (0, f64::INFINITY, f64::INFINITY)
            }
        };
        let (step_c, next_x, delta_x) = axis(gx, col, dx);
        let (step_r, next_y, delta_y) = axis(gy, row, dy);
        let inside = col >= 0 && row >= 0 && (col as usize) < frame.width && (row as usize) < frame.height;
        Self { frame, col, row, step_c, step_r, next_x, next_y, delta_x, delta_y, t: 0.0, max_dist, done: !inside }
    }
}

impl Iterator for RayWalk {
    type Item = CellCrossing;

    fn next(&mut self) -> Option<CellCrossing> {
        if self.done || self.t > self.max_dist {
            return None;
        }
        let exit = self.next_x.min(self.next_y);
        let crossing = CellCrossing { col: self.col as usize, row: self.row as usize, enter: self.t, exit };
        if self.next_x < self.next_y {
            self.col += self.step_c;
            self.t = self.next_x;
            self.next_x += self.delta_x;
        } else {
            self.row += self.step_r;
            self.t = self.next_y;
            self.next_y += self.delta_y;
        }
        if self.col < 0
            || self.row < 0
            || self.col as usize >= self.frame.width
            || self.row as usize >= self.frame.height
            || !self.t.is_finite()
        {
            self.done = true;
        }
        Some(crossing)
    }
}

/// Distance along the ray to the first blocked cell, if one lies within
/// `max_dist`. A ray starting inside a blocked cell reports 0.
pub fn cast(
    frame: GridFrame,
    start: Point,
    heading: f64,
    max_dist: f64,
    blocked: impl Fn(usize, usize) -> bool,
) -> Option<f64> {
    RayWalk::new(frame, start, heading, max_dist)
        .find(|c| blocked(c.col, c.row))
        .map(|c| c.enter)
        .filter(|&d| d <= max_dist)
}

/// True when no blocked cell lies strictly between `from` and the cell
/// containing `to`. The end cell itself may be blocked (walls are visible).
pub fn line_of_sight(frame: GridFrame, from: Point, to: Point, blocked: impl Fn(usize, usize) -> bool) -> bool {
    let Some(goal) = frame.cell_of(to) else {
        return false;
    };
    let dist = from.distance(to);
    if dist < 1e-12 {
        return true;
    }
    let dir = ((to.x - from.x) / dist, (to.y - from.y) / dist);
    for c in RayWalk::along(frame, from, dir, dist) {
        if (c.col, c.row) == goal {
            return true;
        }
        if c.enter >= dist - 1e-9 {
            break;
        }
        if blocked(c.col, c.row) {
            return false;
        }
    }
    true
}

/// Indices of all cells inside the view cone that are visible from `pose`.
///
/// A cell is in the cone when its center lies within `range` and within
/// `fov / 2` of the heading. The cell holding the pose is always included.
pub fn visible_cone_cells(
    frame: GridFrame,
    pose: &Pose,
    fov: f64,
    range: f64,
    blocked: impl Fn(usize, usize) -> bool,
) -> Vec<usize> {
    let origin = pose.position();
    let Some(home) = frame.cell_of(origin) else {
        return Vec::new();
    };
    let full_circle = fov >= std::f64::consts::TAU - 1e-12;
    let min_cos = (fov / 2.0 + 1e-12).min(std::f64::consts::PI).cos();
    let (hx, hy) = (pose.heading.cos(), pose.heading.sin());
    let range_sq = range * range;
    let span = (range / frame.resolution).ceil() as i64 + 1;
    let (hc, hr) = (home.0 as i64, home.1 as i64);
    let clamp = |v: i64, hi: usize| v.clamp(0, hi as i64 - 1) as usize;
    let (c0, c1) = (clamp(hc - span, frame.width), clamp(hc + span, frame.width));
    let (r0, r1) = (clamp(hr - span, frame.height), clamp(hr + span, frame.height));

    let mut out = Vec::new();
    for row in r0..=r1 {
        for col in c0..=c1 {
            if (col, row) == home {
                out.push(frame.index(col, row));
                continue;
            }
            let center = frame.center(col, row);
            let (vx, vy) = (center.x - origin.x, center.y - origin.y);
            let d_sq = vx * vx + vy * vy;
            if d_sq > range_sq {
                continue;
            }
            if !full_circle && vx * hx + vy * hy < min_cos * d_sq.sqrt() {
                continue;
            }
            if line_of_sight(frame, origin, center, &blocked) {
                out.push(frame.index(col, row));
            }
        }
    }
    out
}
