use serde::{Deserialize, Serialize};

use super::{CellState, GeoMap};
use crate::geometry::Point;

pub const DEFAULT_MIN_FRONTIER_CELLS: usize = 3;

/// A connected run of free cells bordering unexplored space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub id: usize,
    /// World position of the member cell nearest the component centroid.
    pub center: Point,
    pub center_cell: (usize, usize),
    /// Member cell indices, ascending.
    pub cells: Vec<usize>,
}

impl Frontier {
    pub fn size(&self) -> usize {
        self.cells.len()
    }
}

const N4: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
const N8: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

fn neighbor(map: &GeoMap, col: usize, row: usize, d: (i64, i64)) -> Option<(usize, usize)> {
    let c = col as i64 + d.0;
    let r = row as i64 + d.1;
    (c >= 0 && r >= 0 && (c as usize) < map.width() && (r as usize) < map.height()).then_some((c as usize, r as usize))
}

pub(crate) fn is_boundary(map: &GeoMap, col: usize, row: usize) -> bool {
    map.state(col, row) == CellState::Free
        && N4.iter().filter_map(|&d| neighbor(map, col, row, d)).any(|(c, r)| map.state(c, r) == CellState::Unexplored)
}

/// All 8-connected components of boundary cells with at least `min_cells`
/// members, ordered by center `(y, x)`; ids follow that order.
pub fn extract_frontiers(map: &GeoMap, min_cells: usize) -> Vec<Frontier> {
    let n = map.width() * map.height();
    let mut boundary = vec![false; n];
    for row in 0..map.height() {
        for col in 0..map.width() {
            boundary[map.index(col, row)] = is_boundary(map, col, row);
        }
    }

    let mut seen = vec![false; n];
    let mut frontiers = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n {
        if !boundary[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut members = Vec::new();
        while let Some(i) = stack.pop() {
            members.push(i);
            let (col, row) = map.coords(i);
            for &d in &N8 {
                if let Some((c, r)) = neighbor(map, col, row, d) {
                    let j = map.index(c, r);
                    if boundary[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if members.len() < min_cells.max(1) {
            continue;
        }
        members.sort_unstable();
        let centers: Vec<Point> = members
            .iter()
            .map(|&i| {
                let (c, r) = map.coords(i);
                map.cell_center(c, r)
            })
            .collect();
        let k = centers.len() as f64;
        let mean =
            Point::new(centers.iter().map(|p| p.x).sum::<f64>() / k, centers.iter().map(|p| p.y).sum::<f64>() / k);
        let best = (0..centers.len())
            .min_by(|&a, &b| centers[a].distance_sq(mean).total_cmp(&centers[b].distance_sq(mean)))
            .expect("component is non-empty");
        frontiers.push(Frontier {
            id: 0,
            center: centers[best],
            center_cell: map.coords(members[best]),
            cells: members,
        });
    }
    frontiers.sort_by(|a, b| a.center.y.total_cmp(&b.center.y).then(a.center.x.total_cmp(&b.center.x)));
    for (id, f) in frontiers.iter_mut().enumerate() {
        f.id = id;
    }
    frontiers
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blank(w: usize, h: usize) -> GeoMap {
        GeoMap::new(w, h, 0.1, Point::new(0.0, 0.0))
    }

    #[test]
    fn unexplored_map_has_no_frontiers() {
        assert!(extract_frontiers(&blank(10, 10), 3).is_empty());
    }

    #[test]
    fn half_free_map_has_one_column_frontier() {
        let mut map = blank(10, 10);
        for r in 0..10 {
            for c in 0..5 {
                map.set_state(c, r, CellState::Free);
            }
        }
        // Brute force: every free cell with an unexplored 4-neighbor.
        let mut expected = Vec::new();
        for r in 0..10usize {
            for c in 0..10usize {
                let free = map.state(c, r) == CellState::Free;
                let touches = c + 1 < 10 && map.state(c + 1, r) == CellState::Unexplored;
                if free && touches {
                    expected.push(map.index(c, r));
                }
            }
        }
        expected.sort_unstable();
        let frontiers = extract_frontiers(&map, 3);
        assert_eq!(frontiers.len(), 1);
        assert_eq!(frontiers[0].cells, expected);
        assert!(frontiers[0].cells.iter().all(|&i| map.coords(i).0 == 4));
    }

    #[test]
    fn enclosed_free_region_has_no_frontiers() {
        let mut map = blank(8, 8);
        for r in 1..7 {
            for c in 1..7 {
                let edge = r == 1 || r == 6 || c == 1 || c == 6;
                map.set_state(c, r, if edge { CellState::Occupied } else { CellState::Free });
            }
        }
        assert!(extract_frontiers(&map, 1).is_empty());
    }

    #[test]
    fn small_components_are_dropped() {
        let mut map = blank(10, 10);
        map.set_state(3, 3, CellState::Free);
        map.set_state(4, 3, CellState::Free);
        assert!(extract_frontiers(&map, 3).is_empty());
        assert_eq!(extract_frontiers(&map, 2).len(), 1);
    }

    #[test]
    fn center_is_a_member_cell() {
        // An L-shaped component whose centroid falls outside the L.
        let mut map = blank(12, 12);
        for i in 2..9 {
            map.set_state(2, i, CellState::Free);
            map.set_state(i, 2, CellState::Free);
        }
        let f = &extract_frontiers(&map, 3)[0];
        let idx = map.index(f.center_cell.0, f.center_cell.1);
        assert!(f.cells.contains(&idx));
    }
}
