//! Reference graphs and scenarios used by tests, benchmarks and the demo.

use std::collections::BTreeMap;

use crate::dtg::{EdgeCostParams, EdgeParamEntry, LocCount, Node, NodeId, OverwatchOpportunity, Scenario, TopoGraph};
use crate::milp::Occupancy;

fn undirected(nodes: &[(u32, f64, f64)], pairs: &[(u32, u32)], ow: Vec<OverwatchOpportunity>) -> TopoGraph {
    let nodes = nodes.iter().map(|&(id, x, y)| Node { id: NodeId(id), x, y }).collect();
    let mut edges = Vec::new();
    for &(a, b) in pairs {
        edges.push((NodeId(a), NodeId(b)));
        edges.push((NodeId(b), NodeId(a)));
    }
    TopoGraph::new(nodes, edges, BTreeMap::new(), ow).expect("fixture graph is valid")
}

fn opp(watcher: u32, a: u32, b: u32, omega: f64, alpha: u32, gamma: f64) -> OverwatchOpportunity {
    OverwatchOpportunity { watcher: NodeId(watcher), edge: (NodeId(a), NodeId(b)), omega, alpha, gamma }
}

fn node_loc(v: u32) -> (NodeId, NodeId) {
    (NodeId(v), NodeId(v))
}

/// Five-node team example: ten robots leave node 1 and at least one must
/// reach node 5. Edges (1,3), (3,5) and (4,5) are vulnerable; nodes 2 and 3
/// can watch (2,4) and (4,5) respectively.
pub fn illustrative() -> (TopoGraph, Scenario) {
    let nodes = [(1, 0.0, 0.0), (2, 1.0, 1.0), (3, 1.0, -1.0), (4, 2.0, 0.5), (5, 3.0, -0.5)];
    let weights = [((1, 2), 10.0), ((1, 3), 30.0), ((2, 4), 25.0), ((3, 4), 15.0), ((3, 5), 100.0), ((4, 5), 70.0)];
    let pairs: Vec<(u32, u32)> = weights.iter().map(|w| w.0).collect();
    let ow = vec![
        opp(2, 2, 4, 20.0, 2, 2.0),
        opp(2, 4, 2, 20.0, 2, 2.0),
        opp(3, 4, 5, 60.0, 2, 2.0),
        opp(3, 5, 4, 60.0, 2, 2.0),
    ];
    let g = undirected(&nodes, &pairs, ow);
    let vulnerable = [(1, 3), (3, 5), (4, 5)];
    let mut edge_params = Vec::new();
    for &((a, b), w) in &weights {
        let v = vulnerable.contains(&(a, b));
        let p = EdgeCostParams { w_bar: w, a: if v { 4 } else { 1 }, m: if v { 10.0 } else { 1.0 }, r: 1.0 };
        edge_params.push(EdgeParamEntry { edge: (NodeId(a), NodeId(b)), params: p });
        edge_params.push(EdgeParamEntry { edge: (NodeId(b), NodeId(a)), params: p });
    }
    edge_params.sort_by_key(|e| e.edge);
    let s = Scenario {
        n_robots: 10,
        horizon: 10,
        starts: vec![LocCount { location: node_loc(1), count: 10 }],
        goals: vec![LocCount { location: node_loc(5), count: 1 }],
        edge_params,
        time_weight: 10.0,
    };
    (g, s)
}

/// All robots of [`illustrative`] take 1→3→5 as early as possible.
pub fn illustrative_direct_plan(g: &TopoGraph, s: &Scenario) -> Occupancy {
    let n = s.n_robots;
    let at = |loc: (u32, u32)| {
        let mut r = vec![0; g.num_locations()];
        r[g.loc_index((NodeId(loc.0), NodeId(loc.1))).unwrap()] = n;
        r
    };
    let mut p = vec![at((1, 1)), at((1, 3)), at((3, 5))];
    while p.len() < s.horizon as usize {
        p.push(at((5, 5)));
    }
    p
}

/// Two parallel chains joined by rungs, with cross-chain watch positions set
/// up for leapfrogging: a robot at level k on one chain can watch the other
/// chain's edges between levels k-1..k and k..k+1.
pub fn bounding_graph() -> TopoGraph {
    let nodes = [
        (1, 0.0, 0.0),
        (2, 1.0, 1.0),
        (3, 1.0, -1.0),
        (4, 2.0, 1.0),
        (5, 2.0, -1.0),
        (6, 3.0, 1.0),
        (7, 3.0, -1.0),
        (8, 4.0, 1.0),
        (9, 4.0, -1.0),
        (10, 5.0, 1.0),
        (11, 6.0, 0.0),
    ];
    let pairs = [
        (1, 2),
        (1, 3),
        (2, 4),
        (4, 6),
        (6, 8),
        (8, 10),
        (10, 11),
        (3, 5),
        (5, 7),
        (7, 9),
        (9, 11),
        (2, 3),
        (4, 5),
        (6, 7),
        (8, 9),
        (9, 10),
    ];
    let (w, a, g) = (45.0, 2, 0.0);
    let ow = vec![
        opp(3, 2, 4, w, a, g),
        opp(4, 3, 5, w, a, g),
        opp(5, 4, 6, w, a, g),
        opp(6, 5, 7, w, a, g),
        opp(7, 6, 8, w, a, g),
        opp(8, 7, 9, w, a, g),
        opp(9, 8, 10, w, a, g),
        opp(10, 9, 11, w, a, g),
    ];
    undirected(&nodes, &pairs, ow)
}

/// Four robots cross [`bounding_graph`] from node 1 to node 11. Every edge
/// costs 50 and wants two robots, so an unwatched pair pays 50 and a watched
/// pair pays 5.
pub fn bounding_with_horizon(horizon: u32) -> (TopoGraph, Scenario) {
    let g = bounding_graph();
    let mut s = Scenario::simple(&g, 4, horizon, 1, 11, 4, EdgeCostParams { w_bar: 50.0, a: 2, m: 10.0, r: 0.0 });
    s.time_weight = 1.0;
    (g, s)
}

pub fn bounding() -> (TopoGraph, Scenario) {
    bounding_with_horizon(10)
}

/// Short two-chain ladder for leapfrogging. Node 1 is the start, 8 the goal,
/// the top chain is 2-4-6 and the bottom chain 3-5-7. Start and goal edges
/// are cheap; chain edges are dangerous unless a pair on the other chain
/// watches them from the level ahead or behind.
pub fn leapfrog() -> (TopoGraph, Scenario) {
    let nodes = [
        (1, 0.0, 0.0),
        (2, 1.0, 1.0),
        (3, 1.0, -1.0),
        (4, 2.0, 1.0),
        (5, 2.0, -1.0),
        (6, 3.0, 1.0),
        (7, 3.0, -1.0),
        (8, 4.0, 0.0),
    ];
    let cheap = [(1, 2), (1, 3), (6, 8), (7, 8), (2, 3), (4, 5), (6, 7)];
    let chain = [(2, 4), (4, 6), (3, 5), (5, 7)];
    let pairs: Vec<(u32, u32)> = cheap.iter().chain(&chain).copied().collect();
    let (w, a) = (95.0, 2);
    let ow = vec![opp(3, 2, 4, w, a, 0.0), opp(4, 3, 5, w, a, 0.0), opp(5, 4, 6, w, a, 0.0), opp(6, 5, 7, w, a, 0.0)];
    let g = undirected(&nodes, &pairs, ow);
    let mut s = Scenario::simple(&g, 4, 8, 1, 8, 4, EdgeCostParams { w_bar: 5.0, a: 2, m: 10.0, r: 0.0 });
    for &(x, y) in &chain {
        let p = EdgeCostParams { w_bar: 100.0, a: 2, m: 10.0, r: 0.0 };
        s.set_params((NodeId(x), NodeId(y)), p);
        s.set_params((NodeId(y), NodeId(x)), p);
    }
    (g, s)
}

/// `(n_v, undirected edges, overwatch opportunities, horizon)` for the four
/// reference model sizes.
pub const MODEL_SHAPES: [(u32, usize, usize, u32); 4] =
    [(5, 6, 4, 10), (11, 16, 8, 10), (8, 12, 18, 10), (15, 18, 32, 12)];

/// Deterministic connected graph with `n_v` nodes, `n_pairs` undirected edges
/// and `n_o` overwatch opportunities, for reproducing model sizes.
pub fn shape_graph(n_v: u32, n_pairs: usize, n_o: usize, horizon: u32) -> (TopoGraph, Scenario) {
    let mut pairs = Vec::new();
    'outer: for stride in 1..n_v {
        for i in 0..n_v {
            let j = (i + stride) % n_v;
            let (a, b) = (i.min(j) + 1, i.max(j) + 1);
            if a != b && !pairs.contains(&(a, b)) {
                pairs.push((a, b));
                if pairs.len() == n_pairs {
                    break 'outer;
                }
            }
        }
    }
    assert_eq!(pairs.len(), n_pairs, "too many edges requested for {n_v} nodes");
    let nodes: Vec<(u32, f64, f64)> = (1..=n_v)
        .map(|i| {
            let th = std::f64::consts::TAU * (i - 1) as f64 / n_v as f64;
            (i, 10.0 * th.cos(), 10.0 * th.sin())
        })
        .collect();
    let mut directed = Vec::new();
    for &(a, b) in &pairs {
        directed.push((a, b));
        directed.push((b, a));
    }
    let mut ow = Vec::new();
    let mut k = 0usize;
    while ow.len() < n_o {
        let (a, b) = directed[k % directed.len()];
        let watcher = (a + b + (k / directed.len()) as u32) % n_v + 1;
        let cand = opp(watcher, a, b, 4.0, 2, 0.0);
        if watcher != a && watcher != b && !ow.contains(&cand) {
            ow.push(cand);
        }
        k += 1;
        assert!(k < 100 * (n_o + directed.len()), "cannot place {n_o} opportunities");
    }
    let g = undirected(&nodes, &pairs, ow);
    let s = Scenario::simple(&g, 4, horizon, 1, n_v / 2 + 1, 1, EdgeCostParams { w_bar: 10.0, a: 2, m: 2.0, r: 1.0 });
    (g, s)
}

/// Size limits for [`random_instance`].
#[derive(Debug, Clone, Copy)]
pub struct RandomLimits {
    pub max_nodes: u32,
    pub max_robots: u32,
    pub max_horizon: u32,
    pub max_overwatch: usize,
}

/// Seeded connected instance with integer costs. Edge and overwatch
/// parameters respect the convexity conditions and the goal is reachable
/// within the horizon.
pub fn random_instance(seed: u64, lim: RandomLimits) -> (TopoGraph, Scenario) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n_v = rng.random_range(3..=lim.max_nodes.max(3));
    let mut pairs: Vec<(u32, u32)> = (2..=n_v).map(|v| (rng.random_range(1..v), v)).collect();
    for _ in 0..rng.random_range(0..=n_v) {
        let (a, b) = (rng.random_range(1..=n_v), rng.random_range(1..=n_v));
        let e = (a.min(b), a.max(b));
        if a != b && !pairs.contains(&e) {
            pairs.push(e);
        }
    }
    let nodes: Vec<(u32, f64, f64)> =
        (1..=n_v).map(|v| (v, rng.random_range(0.0..10.0), rng.random_range(0.0..10.0))).collect();
    let mut ow = Vec::new();
    for _ in 0..rng.random_range(0..=lim.max_overwatch) {
        let (a, b) = pairs[rng.random_range(0..pairs.len())];
        let (a, b) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
        let watcher = rng.random_range(1..=n_v);
        let alpha = rng.random_range(1..=3u32);
        let per = rng.random_range(1..=6u32);
        let gamma = rng.random_range(0..=per.min(2)) as f64;
        let cand = opp(watcher, a, b, (alpha * per) as f64, alpha, gamma);
        if watcher != a
            && watcher != b
            && !ow.iter().any(|o: &OverwatchOpportunity| o.watcher == cand.watcher && o.edge == cand.edge)
        {
            ow.push(cand);
        }
    }
    let g = undirected(&nodes, &pairs, ow);

    // hop distances from node 1
    let mut hops = vec![u32::MAX; n_v as usize + 1];
    hops[1] = 0;
    let mut queue = std::collections::VecDeque::from([1u32]);
    while let Some(v) = queue.pop_front() {
        for &(a, b) in &pairs {
            let w = if a == v {
                b
            } else if b == v {
                a
            } else {
                continue;
            };
            if hops[w as usize] == u32::MAX {
                hops[w as usize] = hops[v as usize] + 1;
                queue.push_back(w);
            }
        }
    }
    // d hops need d + 2 steps: start loop, d edges, goal loop
    let max_h = lim.max_horizon.max(3);
    let goals: Vec<u32> = (2..=n_v).filter(|&v| hops[v as usize] + 2 <= max_h).collect();
    let goal = goals[rng.random_range(0..goals.len())];
    let horizon = rng.random_range(hops[goal as usize] + 2..=max_h);
    let n_robots = rng.random_range(1..=lim.max_robots.max(1));
    let goal_count = rng.random_range(1..=n_robots);
    let mut s = Scenario::simple(&g, n_robots, horizon, 1, goal, goal_count, EdgeCostParams::plain(1.0));
    for &(a, b) in &pairs {
        let m = rng.random_range(0..=10u32) as f64;
        let p = EdgeCostParams {
            w_bar: rng.random_range(1..=20u32) as f64,
            a: rng.random_range(1..=3),
            m,
            r: rng.random_range(0..=(m as u32).min(3)) as f64,
        };
        s.set_params((NodeId(a), NodeId(b)), p);
        s.set_params((NodeId(b), NodeId(a)), p);
    }
    s.time_weight = rng.random_range(0..=3u32) as f64;
    (g, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtg::validate;

    #[test]
    fn fixtures_validate() {
        for (g, s) in [illustrative(), bounding(), leapfrog(), shape_graph(8, 12, 18, 10), shape_graph(15, 18, 32, 12)]
        {
            assert_eq!(validate(&g, &s), vec![]);
        }
    }

    #[test]
    fn random_instances_validate() {
        let lim = RandomLimits { max_nodes: 8, max_robots: 5, max_horizon: 7, max_overwatch: 4 };
        for seed in 0..300 {
            let (g, s) = random_instance(seed, lim);
            assert_eq!(validate(&g, &s), vec![], "seed {seed}");
            assert!(g.num_nodes() <= 8 && s.n_robots <= 5 && s.horizon <= 7);
        }
        assert_eq!(random_instance(11, lim), random_instance(11, lim));
    }

    #[test]
    fn shapes_match_counts() {
        let (g, _) = shape_graph(8, 12, 18, 10);
        assert_eq!((g.num_locations(), g.num_edges(), g.overwatch().len()), (32, 24, 18));
        let (g, _) = shape_graph(15, 18, 32, 12);
        assert_eq!((g.num_locations(), g.num_edges(), g.overwatch().len()), (51, 36, 32));
    }
}
