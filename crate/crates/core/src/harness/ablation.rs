//! Feature ablations: the same scenario solved with overwatch, vulnerability
//! and teaming switched on one at a time.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::dtg::{EdgeParamEntry, NodeId, Scenario, TopoGraph};
use crate::mid_level::allocate_routes;
use crate::milp::{build_milp, ModelError, Occupancy};
use crate::solver::{solve_milp, Budget, MilpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Plain edge weights only.
    Baseline,
    WithOverwatch,
    /// Overwatch plus minimum coalition size and shortfall penalty.
    WithVulnerability,
    /// Everything, including teaming rewards.
    Full,
}

impl Variant {
    pub const ALL: [Variant; 4] =
        [Variant::Baseline, Variant::WithOverwatch, Variant::WithVulnerability, Variant::Full];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Baseline => "a",
            Variant::WithOverwatch => "b",
            Variant::WithVulnerability => "c",
            Variant::Full => "d",
        }
    }
}

/// Graph and scenario with the features of `v` stripped.
pub fn variant_instance(graph: &TopoGraph, scenario: &Scenario, v: Variant) -> (TopoGraph, Scenario) {
    let g = match v {
        Variant::Baseline => graph.clone().with_overwatch(Vec::new()).expect("clearing overwatch is valid"),
        _ => graph.clone(),
    };
    let mut s = scenario.clone();
    s.edge_params = scenario
        .edge_params
        .iter()
        .map(|e| {
            let mut p = e.params;
            match v {
                Variant::Baseline | Variant::WithOverwatch => {
                    p.a = 1;
                    p.m = 0.0;
                    p.r = 0.0;
                }
                Variant::WithVulnerability => p.r = 0.0,
                Variant::Full => {}
            }
            EdgeParamEntry { edge: e.edge, params: p }
        })
        .collect();
    (g, s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: Variant,
    pub status: MilpStatus,
    pub objective: Option<f64>,
    pub plan: Option<Occupancy>,
    /// (time step, opportunity) pairs with both the watch node and the
    /// watched edge occupied.
    pub overwatch_positions: usize,
    /// Robots that traverse at least one edge.
    pub moving_robots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub variants: Vec<VariantReport>,
}

impl AblationReport {
    pub fn get(&self, v: Variant) -> Option<&VariantReport> {
        self.variants.iter().find(|r| r.variant == v)
    }
}

fn count_overwatch(graph: &TopoGraph, p: &Occupancy) -> usize {
    p.iter()
        .map(|row| {
            graph
                .overwatch()
                .iter()
                .filter(|o| {
                    let w = graph.node_loc(o.watcher).map_or(0, |l| row[l]);
                    let e = graph.loc_index(o.edge).map_or(0, |l| row[l]);
                    w > 0 && e > 0
                })
                .count()
        })
        .sum()
}

pub fn solve_variant(
    graph: &TopoGraph,
    scenario: &Scenario,
    v: Variant,
    budget: Budget,
) -> Result<VariantReport, ModelError> {
    let (g, s) = variant_instance(graph, scenario, v);
    let model = build_milp(&g, &s)?;
    let r = solve_milp(&model, budget);
    let plan = r.incumbent.map(|i| i.p);
    let (overwatch_positions, moving_robots) = match &plan {
        Some(p) => {
            let moving = allocate_routes(&g, p, s.n_robots)
                .map(|routes| routes.routes.iter().filter(|r| r.iter().any(|&l| !g.is_self_loop(l))).count())
                .unwrap_or(0);
            (count_overwatch(graph, p), moving)
        }
        None => (0, 0),
    };
    let objective = plan.as_ref().map(|_| r.objective);
    Ok(VariantReport { variant: v, status: r.status, objective, plan, overwatch_positions, moving_robots })
}

/// Solves variants (a) through (d).
pub fn ablation_suite(graph: &TopoGraph, scenario: &Scenario, budget: Budget) -> Result<AblationReport, ModelError> {
    let variants = Variant::ALL.iter().map(|&v| solve_variant(graph, scenario, v, budget)).collect::<Result<_, _>>()?;
    Ok(AblationReport { variants })
}

/// Optimal baseline objective computed without the MILP: the goal robots
/// move together along a hop-constrained shortest path starting at t = 2,
/// paying `max(w_bar, 1)` per edge and `time_weight * t` per moving step.
/// Requires every robot to start on one node and a single goal node.
pub fn shortest_path_objective(graph: &TopoGraph, scenario: &Scenario) -> Option<f64> {
    let start = match scenario.starts.as_slice() {
        [s] if s.location.0 == s.location.1 => s.location.0,
        _ => return None,
    };
    let (goal, need) = match scenario.goals.as_slice() {
        [] => return Some(0.0),
        [g] if g.location.0 == g.location.1 => (g.location.0, g.count),
        _ => return None,
    };
    if need == 0 || start == goal {
        return Some(0.0);
    }
    // the goal self-loop must follow the last edge
    let max_hops = scenario.horizon.saturating_sub(2) as usize;
    let weight = |a: NodeId, b: NodeId| scenario.params_for((a, b)).map(|p| p.w_bar.max(1.0));
    let index = |v: NodeId| graph.nodes().iter().position(|n| n.id == v);
    let n = graph.num_nodes();
    // dist[k][v]: cheapest walk from start to v with exactly k edges
    let mut dist = vec![vec![f64::INFINITY; n]; max_hops + 1];
    dist[0][index(start)?] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push((Reverse(OrdF64(0.0)), 0usize, start));
    while let Some((Reverse(OrdF64(d)), k, v)) = heap.pop() {
        if d > dist[k][index(v)?] || k == max_hops {
            continue;
        }
        for &l in graph.outgoing(v) {
            let (_, w) = graph.location(l);
            if w == v {
                continue;
            }
            let nd = d + weight(v, w)?;
            let wi = index(w)?;
            if nd < dist[k + 1][wi] {
                dist[k + 1][wi] = nd;
                heap.push((Reverse(OrdF64(nd)), k + 1, w));
            }
        }
    }
    let gi = index(goal)?;
    (1..=max_hops)
        .filter(|&k| dist[k][gi].is_finite())
        .map(|k| dist[k][gi] + scenario.time_weight * (2..=k + 1).sum::<usize>() as f64)
        .min_by(f64::total_cmp)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, RandomLimits};

    #[test]
    fn baseline_matches_shortest_path_on_random_graphs() {
        let lim = RandomLimits { max_nodes: 7, max_robots: 3, max_horizon: 6, max_overwatch: 3 };
        for seed in 0..20 {
            let (g, s) = fixtures::random_instance(1000 + seed, lim);
            let a = solve_variant(&g, &s, Variant::Baseline, Budget::seconds(30.0)).unwrap();
            assert_eq!(a.status, MilpStatus::Optimal);
            let want = shortest_path_objective(&g, &s).unwrap();
            assert!((a.objective.unwrap() - want).abs() < 1e-6, "seed {seed}: {:?} vs {want}", a.objective);
        }
    }

    #[test]
    fn overwatch_never_hurts() {
        let lim = RandomLimits { max_nodes: 7, max_robots: 4, max_horizon: 6, max_overwatch: 4 };
        for seed in 0..20 {
            let (g, s) = fixtures::random_instance(2000 + seed, lim);
            let a = solve_variant(&g, &s, Variant::Baseline, Budget::seconds(30.0)).unwrap();
            let b = solve_variant(&g, &s, Variant::WithOverwatch, Budget::seconds(30.0)).unwrap();
            assert!(b.objective.unwrap() <= a.objective.unwrap() + 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn variants_strip_features() {
        let (g, s) = fixtures::illustrative();
        let (ga, sa) = variant_instance(&g, &s, Variant::Baseline);
        assert!(ga.overwatch().is_empty());
        assert!(sa.edge_params.iter().all(|e| e.params.a == 1 && e.params.m == 0.0 && e.params.r == 0.0));
        let (gc, sc) = variant_instance(&g, &s, Variant::WithVulnerability);
        assert_eq!(gc.overwatch().len(), g.overwatch().len());
        assert!(sc.edge_params.iter().any(|e| e.params.a > 1) && sc.edge_params.iter().all(|e| e.params.r == 0.0));
        assert_eq!(variant_instance(&g, &s, Variant::Full), (g, s));
    }

    #[test]
    fn leapfrog_overwatch_variant_uses_watch_positions() {
        let (g, s) = fixtures::leapfrog();
        let b = solve_variant(&g, &s, Variant::WithOverwatch, Budget::default()).unwrap();
        assert!(b.overwatch_positions >= 1);
    }
}
