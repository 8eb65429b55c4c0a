use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{CellState, GeoMap};
use crate::error::{NavError, Result};
use crate::geometry::{Point, Pose};

/// Result of a path query. Unreachable goals are distinct from a zero-length path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PathLength {
    Reachable(f64),
    Unreachable,
}

impl PathLength {
    pub fn meters(self) -> Option<f64> {
        match self {
            PathLength::Reachable(d) => Some(d),
            PathLength::Unreachable => None,
        }
    }
}

/// Geodesic length of the shortest 8-connected path over free cells.
/// Diagonal moves cost `√2 · resolution` and may not cut blocked corners.
pub fn shortest_path(map: &GeoMap, from: &Pose, to: Point) -> Result<PathLength> {
    let start = map
        .cell_of(from.position())
        .filter(|&(c, r)| map.state(c, r) == CellState::Free)
        .ok_or(NavError::StartNotFree { x: from.x, y: from.y })?;
    let Some(goal) = map.cell_of(to).filter(|&(c, r)| map.state(c, r) == CellState::Free) else {
        return Ok(PathLength::Unreachable);
    };
    let mut planner = PathPlanner::new();
    let found = planner.search(map, map.index(start.0, start.1), map.index(goal.0, goal.1), CostMode::Geometric);
    Ok(match found {
        Some(cost) => PathLength::Reachable(cost),
        None => PathLength::Unreachable,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum CostMode {
    /// Plain geodesic length.
    Geometric,
    /// Geodesic length with a surcharge on cells touching obstacles, used
    /// for driving so that paths keep clear of walls.
    Clearance,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Entry {
    priority: f64,
    cost: f64,
    cell: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.priority.total_cmp(&self.priority).then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Distances from one source cell to every reachable free cell.
#[derive(Clone, Debug)]
pub struct CostField {
    pub source: usize,
    pub dist: Vec<f64>,
}

impl CostField {
    pub fn get(&self, cell: usize) -> Option<f64> {
        let d = self.dist[cell];
        d.is_finite().then_some(d)
    }
}

const CLEARANCE_SURCHARGE: f64 = 2.0;

/// Grid search with reusable scratch buffers.
#[derive(Clone, Debug, Default)]
pub struct PathPlanner {
    cost: Vec<f64>,
    parent: Vec<usize>,
    stamp: Vec<u32>,
    generation: u32,
    heap: BinaryHeap<Entry>,
}

impl PathPlanner {
    pub fn new() -> Self {
        Self::default()
    }

    fn reset(&mut self, n: usize) {
        if self.stamp.len() != n {
            self.cost = vec![f64::INFINITY; n];
            self.parent = vec![usize::MAX; n];
            self.stamp = vec![0; n];
            self.generation = 0;
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
        self.heap.clear();
    }

    fn cost_of(&self, i: usize) -> f64 {
        if self.stamp[i] == self.generation {
            self.cost[i]
        } else {
            f64::INFINITY
        }
    }

    fn relax(&mut self, i: usize, cost: f64, parent: usize) -> bool {
        if cost < self.cost_of(i) {
            self.stamp[i] = self.generation;
            self.cost[i] = cost;
            self.parent[i] = parent;
            true
        } else {
            false
        }
    }

    fn step_cost(map: &GeoMap, to: usize, base: f64, mode: CostMode) -> f64 {
        match mode {
            CostMode::Geometric => base,
            CostMode::Clearance => {
                let (c, r) = map.coords(to);
                let near_wall = neighbors8(map, c, r).any(|(nc, nr, _)| map.state(nc, nr) == CellState::Occupied);
                if near_wall {
                    base * (1.0 + CLEARANCE_SURCHARGE)
                } else {
                    base
                }
            }
        }
    }

    /// A* from `start` to `goal`; returns the path cost.
    pub(crate) fn search(&mut self, map: &GeoMap, start: usize, goal: usize, mode: CostMode) -> Option<f64> {
        self.reset(map.width() * map.height());
        let res = map.resolution();
        let (gc, gr) = map.coords(goal);
        let h = |i: usize| {
            let (c, r) = map.coords(i);
            let dx = c.abs_diff(gc) as f64;
            let dy = r.abs_diff(gr) as f64;
            res * (dx.max(dy) + (std::f64::consts::SQRT_2 - 1.0) * dx.min(dy))
        };
        self.relax(start, 0.0, usize::MAX);
        self.heap.push(Entry { priority: h(start), cost: 0.0, cell: start });
        while let Some(Entry { cost, cell, .. }) = self.heap.pop() {
            if cost > self.cost_of(cell) {
                continue;
            }
            if cell == goal {
                return Some(cost);
            }
            let (c, r) = map.coords(cell);
            for (nc, nr, diag) in passable_moves(map, c, r) {
                let j = map.index(nc, nr);
                let base = if diag { res * std::f64::consts::SQRT_2 } else { res };
                let next = cost + Self::step_cost(map, j, base, mode);
                if self.relax(j, next, cell) {
                    self.heap.push(Entry { priority: next + h(j), cost: next, cell: j });
                }
            }
        }
        None
    }

    /// Cell sequence of the most recent successful `search`, start first.
    pub(crate) fn path_to(&self, goal: usize) -> Vec<usize> {
        let mut out = vec![goal];
        let mut cur = goal;
        while self.parent[cur] != usize::MAX && self.stamp[cur] == self.generation {
            cur = self.parent[cur];
            out.push(cur);
        }
        out.reverse();
        out
    }

    /// Planned cells from `start` to `goal`, or `None` when unreachable.
    pub fn plan(&mut self, map: &GeoMap, start: usize, goal: usize, clearance: bool) -> Option<Vec<usize>> {
        let mode = if clearance { CostMode::Clearance } else { CostMode::Geometric };
        self.search(map, start, goal, mode).map(|_| self.path_to(goal))
    }

    /// Geodesic distances from `source` to each of `targets`. The search
    /// stops as soon as every target has been settled.
    pub fn distances_to(&mut self, map: &GeoMap, source: usize, targets: &[usize]) -> Vec<Option<f64>> {
        self.reset(map.width() * map.height());
        let res = map.resolution();
        let mut pending: Vec<usize> = targets.to_vec();
        pending.sort_unstable();
        pending.dedup();
        self.relax(source, 0.0, usize::MAX);
        self.heap.push(Entry { priority: 0.0, cost: 0.0, cell: source });
        while let Some(Entry { cost, cell, .. }) = self.heap.pop() {
            if cost > self.cost_of(cell) {
                continue;
            }
            if let Ok(k) = pending.binary_search(&cell) {
                pending.remove(k);
                if pending.is_empty() {
                    break;
                }
            }
            let (c, r) = map.coords(cell);
            for (nc, nr, diag) in passable_moves(map, c, r) {
                let j = map.index(nc, nr);
                let next = cost + if diag { res * std::f64::consts::SQRT_2 } else { res };
                if self.relax(j, next, cell) {
                    self.heap.push(Entry { priority: next, cost: next, cell: j });
                }
            }
        }
        targets
            .iter()
            .map(|&t| {
                let d = self.cost_of(t);
                (d.is_finite() && !pending.contains(&t)).then_some(d)
            })
            .collect()
    }

    /// Full Dijkstra expansion from `source` over free cells.
    pub fn cost_field(&mut self, map: &GeoMap, source: usize) -> CostField {
        self.reset(map.width() * map.height());
        let res = map.resolution();
        self.relax(source, 0.0, usize::MAX);
        self.heap.push(Entry { priority: 0.0, cost: 0.0, cell: source });
        while let Some(Entry { cost, cell, .. }) = self.heap.pop() {
            if cost > self.cost_of(cell) {
                continue;
            }
            let (c, r) = map.coords(cell);
            for (nc, nr, diag) in passable_moves(map, c, r) {
                let j = map.index(nc, nr);
                let next = cost + if diag { res * std::f64::consts::SQRT_2 } else { res };
                if self.relax(j, next, cell) {
                    self.heap.push(Entry { priority: next, cost: next, cell: j });
                }
            }
        }
        let dist = (0..self.stamp.len()).map(|i| self.cost_of(i)).collect();
        CostField { source, dist }
    }
}

fn neighbors8(map: &GeoMap, col: usize, row: usize) -> impl Iterator<Item = (usize, usize, bool)> + '_ {
    const D: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
    D.iter().filter_map(move |&(dc, dr)| {
        let c = col as i64 + dc;
        let r = row as i64 + dr;
        (c >= 0 && r >= 0 && (c as usize) < map.width() && (r as usize) < map.height()).then_some((
            c as usize,
            r as usize,
            dc != 0 && dr != 0,
        ))
    })
}

/// Free neighbors reachable in one move. Diagonals need both adjoining
/// orthogonal cells free.
fn passable_moves(map: &GeoMap, col: usize, row: usize) -> impl Iterator<Item = (usize, usize, bool)> + '_ {
    neighbors8(map, col, row).filter(move |&(c, r, diag)| {
        map.state(c, r) == CellState::Free
            && (!diag || (map.state(c, row) == CellState::Free && map.state(col, r) == CellState::Free))
    })
}
