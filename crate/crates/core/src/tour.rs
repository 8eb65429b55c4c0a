//! Open-path TSP heuristics over a distance matrix whose node 0 is the
//! fixed start (the agent) and nodes `1..n` are the places to visit.

/// Cost of visiting `order` (node indices, start excluded) from node 0.
pub fn tour_cost(dist: &[Vec<f64>], order: &[usize]) -> f64 {
    let mut prev = 0;
    let mut total = 0.0;
    for &n in order {
        total += dist[prev][n];
        prev = n;
    }
    total
}

/// Greedy tour: always move to the closest unvisited node; ties go to the
/// lower index.
pub fn nearest_neighbor(dist: &[Vec<f64>]) -> Vec<usize> {
    let n = dist.len();
    let mut visited = vec![false; n];
    visited[0] = true;
    let mut order = Vec::with_capacity(n.saturating_sub(1));
    let mut cur = 0;
    for _ in 1..n {
        let next = (1..n)
            .filter(|&j| !visited[j])
            .min_by(|&a, &b| dist[cur][a].total_cmp(&dist[cur][b]).then(a.cmp(&b)))
            .expect("unvisited node remains");
        visited[next] = true;
        order.push(next);
        cur = next;
    }
    order
}

/// Best-improvement 2-opt on an open path with a fixed start. Reverses the
/// segment that shortens the tour most until no reversal helps.
pub fn two_opt(dist: &[Vec<f64>], order: &[usize]) -> Vec<usize> {
    const EPS: f64 = 1e-9;
    // path[0] is the fixed start node.
    let mut path: Vec<usize> = std::iter::once(0).chain(order.iter().copied()).collect();
    let m = path.len();
    loop {
        let mut best = (0.0, 0, 0);
        for i in 1..m.saturating_sub(1) {
            for j in (i + 1)..m {
                let a = path[i - 1];
                let b = path[i];
                let c = path[j];
                let removed_tail = if j + 1 < m { dist[c][path[j + 1]] } else { 0.0 };
                let added_tail = if j + 1 < m { dist[b][path[j + 1]] } else { 0.0 };
                let delta = dist[a][c] + added_tail - dist[a][b] - removed_tail;
                if delta < best.0 - EPS {
                    best = (delta, i, j);
                }
            }
        }
        if best.1 == 0 {
            break;
        }
        path[best.1..=best.2].reverse();
    }
    path.remove(0);
    path
}

/// Nearest neighbor followed by 2-opt.
pub fn plan_open_tour(dist: &[Vec<f64>]) -> Vec<usize> {
    two_opt(dist, &nearest_neighbor(dist))
}
