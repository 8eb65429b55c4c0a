//! Geometric occupancy map built from depth observations.

mod frontier;
mod path;

pub use frontier::{extract_frontiers, Frontier, DEFAULT_MIN_FRONTIER_CELLS};
pub use path::{shortest_path, CostField, PathLength, PathPlanner};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::geometry::{Point, Pose};
use crate::raycast::{GridFrame, RayWalk};

/// Depth limits of the simulated RGB-D sensor, meters.
pub const MIN_DEPTH: f64 = 0.5;
pub const MAX_DEPTH: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellState {
    Unexplored,
    Free,
    Occupied,
}

impl CellState {
    pub fn symbol(self) -> char {
        match self {
            CellState::Unexplored => '.',
            CellState::Free => ' ',
            CellState::Occupied => '#',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            '.' => Some(CellState::Unexplored),
            ' ' => Some(CellState::Free),
            '#' => Some(CellState::Occupied),
            _ => None,
        }
    }
}

/// Map geometry configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapConfig {
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self { resolution: 0.1, width: 200, height: 200 }
    }
}

/// One beam of a planar depth scan. `bearing` is relative to the sensor
/// heading; `hit` is false when the beam returned no surface within range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthRay {
    pub bearing: f64,
    pub range: f64,
    pub hit: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DepthScan {
    pub rays: Vec<DepthRay>,
    pub min_depth: f64,
    pub max_depth: f64,
}

impl DepthScan {
    pub fn new(rays: Vec<DepthRay>) -> Self {
        Self { rays, min_depth: MIN_DEPTH, max_depth: MAX_DEPTH }
    }
}

/// The occupancy grid. Dimensions are fixed at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct GeoMap {
    frame: GridFrame,
    cells: Vec<CellState>,
}

impl GeoMap {
    pub fn new(width: usize, height: usize, resolution: f64, origin: Point) -> Self {
        Self {
            frame: GridFrame { width, height, resolution, origin },
            cells: vec![CellState::Unexplored; width * height],
        }
    }

    pub fn from_config(config: &MapConfig) -> Self {
        Self::new(config.width, config.height, config.resolution, Point::new(0.0, 0.0))
    }

    pub fn frame(&self) -> GridFrame {
        self.frame
    }

    pub fn width(&self) -> usize {
        self.frame.width
    }

    pub fn height(&self) -> usize {
        self.frame.height
    }

    pub fn resolution(&self) -> f64 {
        self.frame.resolution
    }

    pub fn origin(&self) -> Point {
        self.frame.origin
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn state(&self, col: usize, row: usize) -> CellState {
        self.cells[self.frame.index(col, row)]
    }

    pub fn state_at(&self, p: Point) -> Option<CellState> {
        self.frame.cell_of(p).map(|(c, r)| self.state(c, r))
    }

    pub fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        self.frame.cell_of(p)
    }

    pub fn cell_center(&self, col: usize, row: usize) -> Point {
        self.frame.center(col, row)
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        self.frame.index(col, row)
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        self.frame.coords(index)
    }

    pub fn is_occupied(&self, col: usize, row: usize) -> bool {
        self.state(col, row) == CellState::Occupied
    }

    /// Marks a cell free unless it is already occupied.
    pub fn mark_free(&mut self, col: usize, row: usize) {
        let i = self.frame.index(col, row);
        if self.cells[i] == CellState::Unexplored {
            self.cells[i] = CellState::Free;
        }
    }

    pub fn mark_occupied(&mut self, col: usize, row: usize) {
        let i = self.frame.index(col, row);
        self.cells[i] = CellState::Occupied;
    }

    pub fn explored_count(&self) -> usize {
        self.cells.iter().filter(|&&s| s != CellState::Unexplored).count()
    }

    fn check_inside(&self, p: Point) -> Result<(usize, usize)> {
        self.frame.cell_of(p).ok_or(NavError::OutOfBounds {
            x: p.x,
            y: p.y,
            width: self.frame.width,
            height: self.frame.height,
        })
    }

    /// Fuses a planar depth scan taken at `pose` into the map.
    ///
    /// Cells a beam traverses before its endpoint become Free; the endpoint
    /// cell becomes Occupied on a hit and Free otherwise. Ranges are clipped
    /// to the scan's depth limits. Occupied cells never revert.
    pub fn integrate_observation(&mut self, pose: &Pose, scan: &DepthScan) -> Result<()> {
        let home = self.check_inside(pose.position())?;
        if scan.rays.is_empty() {
            return Ok(());
        }
        self.mark_free(home.0, home.1);
        for ray in &scan.rays {
            let range = ray.range.clamp(scan.min_depth, scan.max_depth);
            let heading = pose.heading + ray.bearing;
            for cell in RayWalk::new(self.frame, pose.position(), heading, range) {
                let endpoint = range < cell.exit;
                if endpoint && ray.hit {
                    self.mark_occupied(cell.col, cell.row);
                } else {
                    self.mark_free(cell.col, cell.row);
                }
                if endpoint {
                    break;
                }
            }
        }
        Ok(())
    }

    /// Plain-text snapshot: one line per row (top row first), one character
    /// per cell: `.` unexplored, space free, `#` occupied.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity((self.width() + 1) * self.height() + 64);
        let _ = writeln!(
            out,
            "geomap {} {} {} {} {}",
            self.width(),
            self.height(),
            self.resolution(),
            self.origin().x,
            self.origin().y
        );
        for row in (0..self.height()).rev() {
            out.extend((0..self.width()).map(|c| self.state(c, row).symbol()));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| NavError::Trace(format!("geomap text: {m}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("missing header"))?;
        let parts: Vec<&str> = header.split(' ').collect();
        if parts.len() != 6 || parts[0] != "geomap" {
            return Err(bad("malformed header"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
        let width = parts[1].parse::<usize>().map_err(|_| bad("bad width"))?;
        let height = parts[2].parse::<usize>().map_err(|_| bad("bad height"))?;
        let mut map = GeoMap::new(width, height, num(parts[3])?, Point::new(num(parts[4])?, num(parts[5])?));
        let rows: Vec<&str> = lines.collect();
        if rows.len() != height {
            return Err(bad("row count mismatch"));
        }
        for (k, line) in rows.iter().enumerate() {
            let row = height - 1 - k;
            let chars: Vec<char> = line.chars().collect();
            if chars.len() != width {
                return Err(bad("row width mismatch"));
            }
            for (col, ch) in chars.into_iter().enumerate() {
                let state = CellState::from_symbol(ch).ok_or_else(|| bad("unknown cell symbol"))?;
                let i = map.index(col, row);
                map.cells[i] = state;
            }
        }
        Ok(map)
    }

    /// Test and tooling helper: overwrite a cell's state unconditionally.
    pub fn set_state(&mut self, col: usize, row: usize, state: CellState) {
        let i = self.frame.index(col, row);
        self.cells[i] = state;
    }
}
