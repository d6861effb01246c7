//! Visibility-aware grid paths between region nodes, redundancy pruning and
//! reconnection.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use super::raster::{Cell, Grid, GridGeometry, Mask};
use super::regions::{label_grid, CoverRegion};
use super::GraphGenError;

pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Per-cell traversal cost `-ln(max(1 - p, eps))`.
pub fn cell_cost(p: f64, eps: f64) -> f64 {
    -(1.0 - p).max(eps).ln()
}

/// Sum of per-cell costs along `cells`.
pub fn path_cost(map: &Grid<f64>, cells: &[Cell], eps: f64) -> f64 {
    cells.iter().map(|&c| cell_cost(*map.get(c), eps)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    g: f64,
    idx: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on f, then on index for determinism
        other.f.total_cmp(&self.f).then(other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Planned path with its planner cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPath {
    pub cells: Vec<Cell>,
    pub cost: f64,
}

/// Best-first search with successor cost `|step| (1 + lambda n(next))`.
/// `heuristic` false gives plain Dijkstra over the same graph.
fn search(
    obstacles: &Mask,
    vis: &Grid<f64>,
    start: Cell,
    goal: Cell,
    lambda_p: f64,
    eps: f64,
    heuristic: bool,
) -> Result<GridPath, GraphGenError> {
    let geom = obstacles.geom;
    if !vis.same_shape(obstacles) {
        return Err(GraphGenError::Domain("visibility and obstacle grids differ in shape".into()));
    }
    for c in [start, goal] {
        if c.0 >= geom.height || c.1 >= geom.width || *obstacles.get(c) {
            return Err(GraphGenError::Domain(format!("path endpoint {c:?} is blocked or off the grid")));
        }
    }
    let res = geom.resolution;
    let gc = geom.center(goal);
    // shrunk slightly so float rounding never makes it inadmissible
    let h = |c: Cell| {
        if heuristic {
            let p = geom.center(c);
            ((p[0] - gc[0]).powi(2) + (p[1] - gc[1]).powi(2)).sqrt() * (1.0 - 1e-9)
        } else {
            0.0
        }
    };
    let step_cost: Vec<f64> = vis.data.iter().map(|&p| 1.0 + lambda_p * cell_cost(p, eps)).collect();
    let mut g = vec![f64::INFINITY; geom.len()];
    let mut parent = vec![usize::MAX; geom.len()];
    let mut heap = BinaryHeap::new();
    let s = geom.index(start);
    let t = geom.index(goal);
    g[s] = 0.0;
    heap.push(Open { f: h(start), g: 0.0, idx: s });
    while let Some(Open { g: gu, idx: u, .. }) = heap.pop() {
        if gu > g[u] {
            continue;
        }
        if u == t {
            break;
        }
        let cu = geom.cell_of(u);
        for nb in geom.neighbors8(cu) {
            let v = geom.index(nb);
            if *obstacles.get(nb) {
                continue;
            }
            let len = if nb.0 != cu.0 && nb.1 != cu.1 { res * std::f64::consts::SQRT_2 } else { res };
            let gv = gu + len * step_cost[v];
            if gv < g[v] || (gv == g[v] && u < parent[v]) {
                let improved = gv < g[v];
                g[v] = gv;
                parent[v] = u;
                if improved {
                    heap.push(Open { f: gv + h(nb), g: gv, idx: v });
                }
            }
        }
    }
    if !g[t].is_finite() {
        return Err(GraphGenError::Reachability(format!("no path from {start:?} to {goal:?}")));
    }
    let mut cells = vec![goal];
    let mut cur = t;
    while cur != s {
        cur = parent[cur];
        cells.push(geom.cell_of(cur));
    }
    cells.reverse();
    Ok(GridPath { cells, cost: g[t] })
}

/// A* path from `start` to `goal` with the Euclidean heuristic.
pub fn compute_one_path(
    obstacles: &Mask,
    vis: &Grid<f64>,
    start: Cell,
    goal: Cell,
    lambda_p: f64,
    eps: f64,
) -> Result<GridPath, GraphGenError> {
    search(obstacles, vis, start, goal, lambda_p, eps, true)
}

/// Same search without a heuristic; the exactness oracle for A*.
pub fn dijkstra_path(
    obstacles: &Mask,
    vis: &Grid<f64>,
    start: Cell,
    goal: Cell,
    lambda_p: f64,
    eps: f64,
) -> Result<GridPath, GraphGenError> {
    search(obstacles, vis, start, goal, lambda_p, eps, false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEntry {
    pub from: usize,
    pub to: usize,
    pub path: GridPath,
    /// Visibility cost of the path (sum of per-cell costs).
    pub vis_cost: f64,
    /// Restored by reconnection after being pruned.
    pub restored: bool,
}

/// Directed paths between node indices (region order).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PathTable {
    pub entries: Vec<PathEntry>,
    /// Nodes with no path to or from any other node.
    pub disconnected: Vec<usize>,
}

impl PathTable {
    pub fn get(&self, from: usize, to: usize) -> Option<&PathEntry> {
        self.entries.iter().find(|e| e.from == from && e.to == to)
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.entries.iter().filter(|e| e.from == v).count()
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.entries.iter().filter(|e| e.to == v).count()
    }
}

/// True when the path enters a region other than its two endpoint regions.
pub fn path_is_redundant(labels: &Grid<u32>, cells: &[Cell], from: usize, to: usize) -> bool {
    cells.iter().any(|&c| {
        let l = *labels.get(c);
        l != 0 && l as usize - 1 != from && l as usize - 1 != to
    })
}

/// All-pairs paths between `nodes`, with redundant paths pruned and the
/// cheapest pruned paths restored for nodes left without outgoing or
/// incoming edges.
pub fn compute_paths(
    vis: &Grid<f64>,
    obstacles: &Mask,
    regions: &[CoverRegion],
    nodes: &[Cell],
    lambda_p: f64,
    eps: f64,
) -> Result<PathTable, GraphGenError> {
    if regions.len() != nodes.len() {
        return Err(GraphGenError::Domain("one node per region required".into()));
    }
    let geom: GridGeometry = vis.geom;
    let labels = label_grid(geom, regions);
    let n = nodes.len();
    let mut kept: BTreeMap<(usize, usize), PathEntry> = BTreeMap::new();
    let mut best_from: Vec<Option<PathEntry>> = vec![None; n];
    let mut best_to: Vec<Option<PathEntry>> = vec![None; n];
    let mut reachable = vec![false; n];
    let better = |slot: &Option<PathEntry>, e: &PathEntry| slot.as_ref().is_none_or(|b| e.path.cost < b.path.cost);
    for j in 0..n {
        for k in 0..n {
            if j == k {
                continue;
            }
            let path = match compute_one_path(obstacles, vis, nodes[j], nodes[k], lambda_p, eps) {
                Ok(p) => p,
                Err(GraphGenError::Reachability(_)) => continue,
                Err(e) => return Err(e),
            };
            reachable[j] = true;
            reachable[k] = true;
            let vis_cost = path_cost(vis, &path.cells, eps);
            let entry = PathEntry { from: j, to: k, path, vis_cost, restored: false };
            if path_is_redundant(&labels, &entry.path.cells, j, k) {
                if better(&best_from[j], &entry) {
                    best_from[j] = Some(entry.clone());
                }
                if better(&best_to[k], &entry) {
                    best_to[k] = Some(entry);
                }
            } else {
                kept.insert((j, k), entry);
            }
        }
    }
    // reconnect: sinks get their cheapest pruned outgoing path, sources their
    // cheapest pruned incoming one
    for v in 0..n {
        if !kept.keys().any(|&(a, _)| a == v) {
            if let Some(mut e) = best_from[v].take() {
                e.restored = true;
                kept.entry((e.from, e.to)).or_insert(e);
            }
        }
        if !kept.keys().any(|&(_, b)| b == v) {
            if let Some(mut e) = best_to[v].take() {
                e.restored = true;
                kept.entry((e.from, e.to)).or_insert(e);
            }
        }
    }
    Ok(PathTable { entries: kept.into_values().collect(), disconnected: (0..n).filter(|&v| !reachable[v]).collect() })
}

/// World coordinates of the cell centres along a path.
pub fn polyline(geom: &GridGeometry, cells: &[Cell]) -> Vec<[f64; 2]> {
    cells.iter().map(|&c| geom.center(c)).collect()
}

pub fn polyline_length(points: &[[f64; 2]]) -> f64 {
    points.windows(2).map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn open(w: usize, h: usize) -> (Mask, Grid<f64>) {
        let g = GridGeometry::new(w, h, 1.0);
        (Grid::filled(g, false), Grid::filled(g, 0.0))
    }

    fn adjacent(a: Cell, b: Cell) -> bool {
        a != b && a.0.abs_diff(b.0) <= 1 && a.1.abs_diff(b.1) <= 1
    }

    #[test]
    fn cell_cost_clamps() {
        let m = Grid::filled(GridGeometry::new(1, 1, 1.0), 0.0);
        assert_eq!(path_cost(&m, &[(0, 0)], 1e-6), 0.0);
        let e = Grid::filled(m.geom, 1.0 - (-1.0f64).exp());
        assert!((path_cost(&e, &[(0, 0)], 1e-6) - 1.0).abs() < 1e-12);
        let one = Grid::filled(m.geom, 1.0);
        assert!((path_cost(&one, &[(0, 0)], 1e-6) - 13.815510557964274).abs() < 1e-9);
    }

    #[test]
    fn free_map_gives_octile_distance() {
        let (obs, vis) = open(12, 9);
        let p = compute_one_path(&obs, &vis, (1, 1), (4, 10), 5.0, DEFAULT_EPSILON).unwrap();
        let want = 3.0 * std::f64::consts::SQRT_2 + 6.0;
        assert!((p.cost - want).abs() < 1e-12);
        assert_eq!(p.cells.first(), Some(&(1, 1)));
        assert_eq!(p.cells.last(), Some(&(4, 10)));
        assert!(p.cells.windows(2).all(|w| adjacent(w[0], w[1])));
    }

    #[test]
    fn corridor_is_followed() {
        let (mut obs, vis) = open(7, 5);
        for r in 0..5 {
            for c in 0..7 {
                if r != 2 {
                    obs.set((r, c), true);
                }
            }
        }
        let p = compute_one_path(&obs, &vis, (2, 0), (2, 6), 1.0, DEFAULT_EPSILON).unwrap();
        assert_eq!(p.cells, (0..7).map(|c| (2, c)).collect::<Vec<_>>());
    }

    #[test]
    fn walled_goal_is_unreachable() {
        let (mut obs, vis) = open(6, 6);
        for c in obs.geom.neighbors8((3, 3)).collect::<Vec<_>>() {
            obs.set(c, true);
        }
        let r = compute_one_path(&obs, &vis, (0, 0), (3, 3), 1.0, DEFAULT_EPSILON);
        assert!(matches!(r, Err(GraphGenError::Reachability(_))));
    }

    #[test]
    fn bright_stripe_causes_detour() {
        let (obs, mut vis) = open(15, 15);
        for r in 0..12 {
            vis.set((r, 7), 0.99);
        }
        let dark = compute_one_path(&obs, &open(15, 15).1, (5, 1), (5, 13), 0.0, DEFAULT_EPSILON).unwrap();
        assert!(dark.cells.iter().any(|c| c.0 < 12 && c.1 == 7));
        let p = compute_one_path(&obs, &vis, (5, 1), (5, 13), 50.0, DEFAULT_EPSILON).unwrap();
        assert!(p.cells.iter().all(|c| !(c.0 < 12 && c.1 == 7)), "{:?}", p.cells);
        let d = dijkstra_path(&obs, &vis, (5, 1), (5, 13), 50.0, DEFAULT_EPSILON).unwrap();
        assert_eq!(p.cost, d.cost);
    }

    #[test]
    fn astar_equals_dijkstra_on_random_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        for _ in 0..60 {
            let g = GridGeometry::new(rng.random_range(5..25), rng.random_range(5..25), rng.random_range(0.5..2.0));
            let obs = Grid::from_fn(g, |_| rng.random::<f64>() < 0.25);
            let vis = Grid::from_fn(g, |_| rng.random::<f64>());
            let free: Vec<Cell> = (0..g.len()).map(|i| g.cell_of(i)).filter(|&c| !*obs.get(c)).collect();
            if free.len() < 2 {
                continue;
            }
            let a = free[rng.random_range(0..free.len())];
            let b = free[rng.random_range(0..free.len())];
            let lambda = rng.random_range(0.0..10.0);
            let x = compute_one_path(&obs, &vis, a, b, lambda, DEFAULT_EPSILON);
            let y = dijkstra_path(&obs, &vis, a, b, lambda, DEFAULT_EPSILON);
            match (x, y) {
                (Ok(x), Ok(y)) => {
                    assert_eq!(x.cost, y.cost);
                    checked += 1;
                }
                (Err(_), Err(_)) => {}
                (x, y) => panic!("disagree: {x:?} vs {y:?}"),
            }
        }
        assert!(checked >= 50, "only {checked} reachable pairs");
    }

    fn strip_regions() -> (Mask, Grid<f64>, Vec<CoverRegion>, Vec<Cell>) {
        let (obs, vis) = open(21, 3);
        let regions: Vec<CoverRegion> = [1usize, 9, 17]
            .iter()
            .enumerate()
            .map(|(i, &c0)| {
                CoverRegion::from_cells(i, (0..3).flat_map(|r| (c0..c0 + 3).map(move |c| (r, c))).collect())
            })
            .collect();
        let nodes = regions.iter().map(|r| r.node).collect();
        (obs, vis, regions, nodes)
    }

    #[test]
    fn collinear_regions_prune_the_long_edge() {
        let (obs, vis, regions, nodes) = strip_regions();
        let t = compute_paths(&vis, &obs, &regions, &nodes, 1.0, DEFAULT_EPSILON).unwrap();
        assert!(t.get(0, 2).is_none() && t.get(2, 0).is_none());
        for (a, b) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
            assert!(t.get(a, b).is_some(), "{a}->{b}");
        }
        assert!(t.disconnected.is_empty());
    }

    #[test]
    fn two_nodes_connect_both_ways() {
        let (obs, vis, regions, nodes) = strip_regions();
        let t = compute_paths(&vis, &obs, &regions[..2], &nodes[..2], 1.0, DEFAULT_EPSILON).unwrap();
        assert_eq!(t.entries.len(), 2);
    }

    #[test]
    fn walled_node_is_disconnected() {
        let (mut obs, vis, regions, nodes) = strip_regions();
        for r in 0..3 {
            obs.set((r, 15), true);
        }
        let t = compute_paths(&vis, &obs, &regions, &nodes, 1.0, DEFAULT_EPSILON).unwrap();
        assert_eq!(t.disconnected, vec![2]);
        assert!(t.entries.iter().all(|e| e.from != 2 && e.to != 2));
        for v in [0, 1] {
            assert!(t.in_degree(v) >= 1 && t.out_degree(v) >= 1);
        }
    }

    #[test]
    fn path_cost_is_additive() {
        let g = GridGeometry::new(5, 5, 1.0);
        let vis = Grid::from_fn(g, |(r, c)| ((r * 5 + c) as f64) / 25.0);
        let a = vec![(0, 0), (1, 1), (2, 2)];
        let b = vec![(2, 3), (3, 4)];
        let ab: Vec<Cell> = a.iter().chain(&b).copied().collect();
        let lhs = path_cost(&vis, &ab, DEFAULT_EPSILON);
        let rhs = path_cost(&vis, &a, DEFAULT_EPSILON) + path_cost(&vis, &b, DEFAULT_EPSILON);
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
