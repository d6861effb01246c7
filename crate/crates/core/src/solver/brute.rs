//! Exhaustive search over joint robot location sequences.
//!
//! Robots are interchangeable, so the joint state is the sorted multiset of
//! their locations and the search is a shortest path over time-layered
//! multiset states. Every joint move sequence is still covered.

use std::collections::HashMap;

use thiserror::Error;

use crate::dtg::{LocId, Scenario, TopoGraph};
use crate::milp::{evaluate_plan_cost, ModelError, Occupancy, OccupancySolution};

pub const MAX_NODES: usize = 6;
pub const MAX_ROBOTS: u32 = 4;
pub const MAX_HORIZON: u32 = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BruteForceError {
    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),
    #[error("no plan satisfies the goals")]
    Infeasible,
    #[error(transparent)]
    Model(#[from] ModelError),
}

type State = Vec<LocId>;

fn counts(state: &State, n_l: usize) -> Vec<u32> {
    let mut c = vec![0; n_l];
    for &l in state {
        c[l] += 1;
    }
    c
}

/// Cost of one time step, computed by evaluating a plan that differs only
/// in that step. Costs are cached per (time, state).
struct StepCost<'a> {
    graph: &'a TopoGraph,
    scenario: &'a Scenario,
}

impl StepCost<'_> {
    fn cost(&self, state: &State, t: u32) -> f64 {
        // A one-step scenario starting at `state`, with the time weight
        // shifted so the single step is charged as time `t`.
        let n_l = self.graph.num_locations();
        let c = counts(state, n_l);
        let mut s = self.scenario.clone();
        s.horizon = 1;
        s.goals.clear();
        s.starts = c
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0)
            .map(|(l, &k)| crate::dtg::LocCount { location: self.graph.location(l), count: k })
            .collect();
        s.time_weight = self.scenario.time_weight * t as f64;
        evaluate_plan_cost(self.graph, &s, &vec![c]).expect("single-step plan is feasible")
    }
}

/// Minimum-cost occupancy by exhaustive search. Refuses instances beyond
/// 6 nodes, 4 robots or 6 time steps.
pub fn brute_force_solve(graph: &TopoGraph, scenario: &Scenario) -> Result<OccupancySolution, BruteForceError> {
    if graph.num_nodes() > MAX_NODES || scenario.n_robots > MAX_ROBOTS || scenario.horizon > MAX_HORIZON {
        return Err(BruteForceError::TooLarge(format!(
            "{} nodes, {} robots, horizon {}",
            graph.num_nodes(),
            scenario.n_robots,
            scenario.horizon
        )));
    }
    let violations = crate::dtg::validate(graph, scenario);
    if !violations.is_empty() {
        let msg: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(ModelError::Invalid(msg.join("; ")).into());
    }
    let step = StepCost { graph, scenario };
    let start: State = scenario.start_list(graph).map_err(|e| ModelError::Invalid(e.to_string()))?;
    let n_l = graph.num_locations();

    // layers[t] : state -> (cost so far, predecessor)
    let mut layers: Vec<HashMap<State, (f64, Option<State>)>> = Vec::new();
    let mut first = HashMap::new();
    first.insert(start.clone(), (step.cost(&start, 1), None));
    layers.push(first);
    for t in 2..=scenario.horizon {
        let prev = layers.last().unwrap();
        let mut next: HashMap<State, (f64, Option<State>)> = HashMap::new();
        let mut keys: Vec<&State> = prev.keys().collect();
        keys.sort();
        let mut cost_cache: HashMap<State, f64> = HashMap::new();
        for s in keys {
            let base = prev[s].0;
            for succ in successors(graph, s) {
                let c = *cost_cache.entry(succ.clone()).or_insert_with(|| step.cost(&succ, t));
                let total = base + c;
                match next.get(&succ) {
                    Some(&(old, _)) if old <= total => {}
                    _ => {
                        next.insert(succ, (total, Some(s.clone())));
                    }
                }
            }
        }
        layers.push(next);
    }

    let last = layers.last().unwrap();
    let mut finals: Vec<(&State, f64)> = last
        .iter()
        .filter(|(s, _)| {
            let c = counts(s, n_l);
            scenario.goals.iter().all(|g| c[graph.loc_index(g.location).unwrap()] >= g.count)
        })
        .map(|(s, v)| (s, v.0))
        .collect();
    finals.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(b.0)));
    let Some(&(best, _)) = finals.first() else {
        return Err(BruteForceError::Infeasible);
    };

    let mut p: Occupancy = Vec::with_capacity(layers.len());
    let mut cur = best.clone();
    for layer in layers.iter().rev() {
        p.push(counts(&cur, n_l));
        match &layer[&cur].1 {
            Some(prev) => cur = prev.clone(),
            None => break,
        }
    }
    p.reverse();
    Ok(OccupancySolution::from_counts(graph, scenario, p)?)
}

/// All sorted joint successor states of `state`.
fn successors(graph: &TopoGraph, state: &State) -> Vec<State> {
    let options: Vec<&[LocId]> =
        state.iter().map(|&l| graph.next_edge_action_set(l).expect("valid location")).collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; state.len()];
    loop {
        let mut s: State = idx.iter().zip(&options).map(|(&i, o)| o[i]).collect();
        s.sort_unstable();
        out.push(s);
        let mut k = 0;
        loop {
            if k == idx.len() {
                out.sort();
                out.dedup();
                return out;
            }
            idx[k] += 1;
            if idx[k] < options[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtg::{EdgeCostParams, NodeId};

    #[test]
    fn one_move_on_a_chain() {
        let g = TopoGraph::from_undirected(&[1, 2], &[(1, 2)]).unwrap();
        let s = Scenario::simple(&g, 1, 3, 1, 2, 1, EdgeCostParams::plain(5.0));
        let sol = brute_force_solve(&g, &s).unwrap();
        assert_eq!(sol.objective, 7.0);
        // with time-indexed cost the move is made at t = 2
        let e = g.loc_index((NodeId(1), NodeId(2))).unwrap();
        assert_eq!(sol.p[1][e], 1);
    }

    #[test]
    fn start_equals_goal_is_free() {
        let g = TopoGraph::from_undirected(&[1, 2], &[(1, 2)]).unwrap();
        let s = Scenario::simple(&g, 2, 4, 1, 1, 2, EdgeCostParams::plain(5.0));
        assert_eq!(brute_force_solve(&g, &s).unwrap().objective, 0.0);
    }

    #[test]
    fn refuses_large_instances() {
        let g = TopoGraph::from_undirected(&[1, 2, 3, 4, 5, 6, 7], &[(1, 2)]).unwrap();
        let s = Scenario::simple(&g, 1, 3, 1, 2, 1, EdgeCostParams::plain(5.0));
        assert!(matches!(brute_force_solve(&g, &s), Err(BruteForceError::TooLarge(_))));
    }

    #[test]
    fn successor_states_are_multisets() {
        let g = TopoGraph::from_undirected(&[1, 2], &[(1, 2)]).unwrap();
        let home = g.node_loc(NodeId(1)).unwrap();
        // two robots at node 1 each stay or leave: {stay,stay}, {stay,leave}, {leave,leave}
        assert_eq!(successors(&g, &vec![home, home]).len(), 3);
    }
}
