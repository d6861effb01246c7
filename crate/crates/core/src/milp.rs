//! Team-occupancy MILP, the per-robot GMIP baseline and a solver-independent
//! plan evaluator.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtg::{validate, EdgeCostParams, LocId, NodeId, OverwatchOpportunity, Scenario, TopoGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

/// What a model column means, used to decode solver output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarRole {
    /// Team count at location `loc` at 1-based time `t`.
    P {
        loc: LocId,
        t: u32,
    },
    /// Per-robot occupancy indicator.
    X {
        robot: u32,
        loc: LocId,
        t: u32,
    },
    Phi {
        loc: LocId,
        t: u32,
    },
    TravCost {
        loc: LocId,
        t: u32,
    },
    OwCost {
        opp: usize,
        t: u32,
    },
    Psi {
        t: u32,
    },
    Free,
}

impl VarRole {
    /// Higher values are branched on first.
    pub fn branch_priority(&self) -> u8 {
        match self {
            VarRole::Psi { .. } => 3,
            VarRole::Phi { .. } => 2,
            VarRole::P { .. } | VarRole::X { .. } => 1,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
    pub role: VarRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

/// Dimensions needed to decode an occupancy model's solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyLayout {
    pub n_locations: usize,
    pub horizon: u32,
    pub n_robots: u32,
    pub edge_locs: Vec<LocId>,
    pub n_overwatch: usize,
}

/// Minimisation problem in solver-agnostic form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpModel {
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<(usize, f64)>,
    pub layout: Option<OccupancyLayout>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("plan is infeasible: {0}")]
    InfeasiblePlan(String),
    #[error("constraint {row} references undeclared variable {var}")]
    BadReference { row: String, var: usize },
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), variables: Vec::new(), constraints: Vec::new(), objective: Vec::new(), layout: None }
    }

    pub fn add_var(&mut self, name: String, lower: f64, upper: f64, kind: VarKind, role: VarRole) -> usize {
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            _ => (lower, upper),
        };
        self.variables.push(Variable { name, lower, upper, kind, role });
        self.variables.len() - 1
    }

    /// Appends a row, dropping zero coefficients and merging repeats.
    pub fn add_constraint(&mut self, name: String, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        let mut terms = terms;
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (j, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += c,
                _ => merged.push((j, c)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        self.constraints.push(Constraint { name, terms: merged, sense, rhs });
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * x[j]).sum()
    }

    pub fn is_integral_var(&self, j: usize) -> bool {
        self.variables[j].kind != VarKind::Continuous
    }

    /// Confirms every row references a declared variable.
    pub fn check_references(&self) -> Result<(), ModelError> {
        let n = self.variables.len();
        for c in &self.constraints {
            if let Some(&(j, _)) = c.terms.iter().find(|t| t.0 >= n) {
                return Err(ModelError::BadReference { row: c.name.clone(), var: j });
            }
        }
        if let Some(&(j, _)) = self.objective.iter().find(|t| t.0 >= n) {
            return Err(ModelError::BadReference { row: "objective".into(), var: j });
        }
        Ok(())
    }

    /// Describes the first bound, integrality or row violated by `x` beyond `tol`.
    pub fn check_point(&self, x: &[f64], tol: f64, int_tol: f64) -> Result<(), String> {
        if x.len() != self.variables.len() {
            return Err(format!("expected {} values, got {}", self.variables.len(), x.len()));
        }
        for (v, &xv) in self.variables.iter().zip(x) {
            if !xv.is_finite() {
                return Err(format!("{} is not finite", v.name));
            }
            if xv < v.lower - tol || xv > v.upper + tol {
                return Err(format!("{} = {} outside [{}, {}]", v.name, xv, v.lower, v.upper));
            }
            if v.kind != VarKind::Continuous && (xv - xv.round()).abs() > int_tol {
                return Err(format!("{} = {} is not integral", v.name, xv));
            }
        }
        for c in &self.constraints {
            let scale = 1.0 + c.rhs.abs();
            if c.violation(x) > tol * scale {
                return Err(format!("constraint {} violated by {}", c.name, c.violation(x)));
            }
        }
        Ok(())
    }

    /// Copy with every integer/binary variable relaxed to continuous.
    pub fn relaxed(&self) -> Self {
        let mut m = self.clone();
        for v in &mut m.variables {
            v.kind = VarKind::Continuous;
        }
        m
    }
}

/// Number of variables `build_milp` creates for the given shape.
pub fn variable_count(n_l: usize, n_e: usize, n_o: usize, n_t: usize) -> usize {
    n_t * (n_l + 2 * n_e + n_o + 1)
}

/// Traversal cost of `p > 0` robots on an edge before any overwatch benefit.
pub fn traversal_cost(params: &EdgeCostParams, p: u32) -> f64 {
    let (p, a) = (p as f64, params.a as f64);
    if p <= a {
        params.w_bar + params.m * (a - p)
    } else {
        params.w_bar - params.r * (p - a)
    }
}

/// Overwatch benefit (nonpositive) from `watchers` robots at the watcher node.
pub fn overwatch_cost(opp: &OverwatchOpportunity, watchers: u32) -> f64 {
    let (rho, alpha) = (watchers as f64, opp.alpha as f64);
    if rho <= alpha {
        -(opp.omega / alpha) * rho
    } else {
        -opp.omega - opp.gamma * (rho - alpha)
    }
}

fn check_inputs(graph: &TopoGraph, scenario: &Scenario) -> Result<(), ModelError> {
    let v = validate(graph, scenario);
    if v.is_empty() {
        Ok(())
    } else {
        let msgs: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        Err(ModelError::Invalid(msgs.join("; ")))
    }
}

struct Common {
    params: Vec<Option<EdgeCostParams>>,
    edges: Vec<LocId>,
    ow_edge: Vec<LocId>,
    ow_watch: Vec<LocId>,
    n_a: f64,
}

fn common(graph: &TopoGraph, scenario: &Scenario) -> Common {
    let params = scenario.params_by_loc(graph);
    let edges = graph.edge_locs();
    let ow_edge = graph.overwatch().iter().map(|o| graph.loc_index(o.edge).unwrap()).collect();
    let ow_watch = graph.overwatch().iter().map(|o| graph.node_loc(o.watcher).unwrap()).collect();
    Common { params, edges, ow_edge, ow_watch, n_a: scenario.n_robots as f64 }
}

/// Adds the cost variables and rows shared by both formulations for one time
/// step. `count(l)` returns the linear expression for the team count at `l`.
fn add_cost_block(
    model: &mut MilpModel,
    graph: &TopoGraph,
    scenario: &Scenario,
    c: &Common,
    t: u32,
    count: &dyn Fn(LocId) -> Vec<(usize, f64)>,
) {
    let scale = |e: &[(usize, f64)], k: f64| -> Vec<(usize, f64)> { e.iter().map(|&(j, v)| (j, v * k)).collect() };
    let mut phi = vec![usize::MAX; graph.num_locations()];
    let mut cw = vec![usize::MAX; graph.num_locations()];
    for &e in &c.edges {
        phi[e] = model.add_var(format!("phi_{e}_{t}"), 0.0, 1.0, VarKind::Binary, VarRole::Phi { loc: e, t });
    }
    for &e in &c.edges {
        cw[e] = model.add_var(
            format!("cw_{e}_{t}"),
            0.0,
            f64::INFINITY,
            VarKind::Continuous,
            VarRole::TravCost { loc: e, t },
        );
        model.objective.push((cw[e], 1.0));
    }
    let mut cow = Vec::with_capacity(graph.overwatch().len());
    for o in 0..graph.overwatch().len() {
        let j = model.add_var(
            format!("cow_{o}_{t}"),
            f64::NEG_INFINITY,
            0.0,
            VarKind::Continuous,
            VarRole::OwCost { opp: o, t },
        );
        model.objective.push((j, 1.0));
        cow.push(j);
    }
    let psi = model.add_var(format!("psi_{t}"), 0.0, 1.0, VarKind::Binary, VarRole::Psi { t });
    model.objective.push((psi, scenario.time_weight * t as f64));

    for &e in &c.edges {
        let p = c.params[e].expect("validated");
        let pe = count(e);
        let mut row = vec![(cw[e], 1.0)];
        row.extend(scale(&pe, p.m));
        row.push((phi[e], -(p.w_bar + p.m * p.a as f64)));
        model.add_constraint(format!("trav1_{e}_{t}"), row, Sense::Ge, 0.0);
        let mut row = vec![(cw[e], 1.0)];
        row.extend(scale(&pe, p.r));
        row.push((phi[e], -(p.w_bar + p.r * p.a as f64)));
        model.add_constraint(format!("trav2_{e}_{t}"), row, Sense::Ge, 0.0);
    }
    for (o, opp) in graph.overwatch().iter().enumerate() {
        let slope = opp.omega / opp.alpha as f64;
        let pv = count(c.ow_watch[o]);
        let pe = count(c.ow_edge[o]);
        let mut row = vec![(cow[o], 1.0)];
        row.extend(scale(&pv, slope));
        model.add_constraint(format!("ow1_{o}_{t}"), row, Sense::Ge, 0.0);
        let mut row = vec![(cow[o], 1.0)];
        row.extend(scale(&pv, opp.gamma));
        model.add_constraint(format!("ow2_{o}_{t}"), row, Sense::Ge, -opp.omega + opp.gamma * opp.alpha as f64);
        let mut row = vec![(cow[o], 1.0)];
        row.extend(scale(&pe, slope * c.n_a));
        model.add_constraint(format!("ow3_{o}_{t}"), row, Sense::Ge, 0.0);
    }
    for &e in &c.edges {
        let mut row = vec![(phi[e], 1.0)];
        row.extend(scale(&count(e), -1.0 / c.n_a));
        model.add_constraint(format!("used_{e}_{t}"), row, Sense::Ge, 0.0);
    }
    let mut row = vec![(psi, 1.0)];
    for &e in &c.edges {
        row.extend(scale(&count(e), -1.0 / c.n_a));
    }
    model.add_constraint(format!("time_{t}"), row, Sense::Ge, 0.0);
    let by_edge = graph.overwatch_by_edge();
    for &e in &c.edges {
        let mut row = vec![(cw[e], 1.0), (phi[e], -1.0)];
        if let Some(opps) = by_edge.get(&e) {
            row.extend(opps.iter().map(|&o| (cow[o], 1.0)));
        }
        model.add_constraint(format!("nonneg_{e}_{t}"), row, Sense::Ge, 0.0);
    }
}

/// Builds the aggregate-count team MILP.
pub fn build_milp(graph: &TopoGraph, scenario: &Scenario) -> Result<MilpModel, ModelError> {
    check_inputs(graph, scenario)?;
    let c = common(graph, scenario);
    let n_l = graph.num_locations();
    let n_t = scenario.horizon;
    let mut model = MilpModel::new("team_occupancy");
    let mut p = vec![vec![0usize; n_l]; n_t as usize + 1];
    for t in 1..=n_t {
        for (l, slot) in p[t as usize].iter_mut().enumerate() {
            *slot = model.add_var(format!("p_{l}_{t}"), 0.0, c.n_a, VarKind::Integer, VarRole::P { loc: l, t });
        }
        let pt = p[t as usize].clone();
        add_cost_block(&mut model, graph, scenario, &c, t, &|l| vec![(pt[l], 1.0)]);
    }
    for s in &scenario.starts {
        let l = graph.loc_index(s.location).unwrap();
        model.add_constraint(format!("start_{l}"), vec![(p[1][l], 1.0)], Sense::Eq, s.count as f64);
    }
    for g in &scenario.goals {
        let l = graph.loc_index(g.location).unwrap();
        model.add_constraint(format!("goal_{l}"), vec![(p[n_t as usize][l], 1.0)], Sense::Ge, g.count as f64);
    }
    for t in 1..=n_t as usize {
        let row = (0..n_l).map(|l| (p[t][l], 1.0)).collect();
        model.add_constraint(format!("pop_{t}"), row, Sense::Eq, c.n_a);
    }
    for t in 2..=n_t as usize {
        for node in graph.nodes() {
            let mut row: Vec<(usize, f64)> = graph.incoming(node.id).iter().map(|&l| (p[t - 1][l], 1.0)).collect();
            row.extend(graph.outgoing(node.id).iter().map(|&l| (p[t][l], -1.0)));
            model.add_constraint(format!("flow_{}_{t}", node.id), row, Sense::Eq, 0.0);
        }
    }
    model.layout = Some(layout(graph, scenario, &c));
    Ok(model)
}

fn layout(graph: &TopoGraph, scenario: &Scenario, c: &Common) -> OccupancyLayout {
    OccupancyLayout {
        n_locations: graph.num_locations(),
        horizon: scenario.horizon,
        n_robots: scenario.n_robots,
        edge_locs: c.edges.clone(),
        n_overwatch: graph.overwatch().len(),
    }
}

/// Builds the per-robot binary baseline with the same costs applied to
/// aggregate counts.
pub fn build_gmip(graph: &TopoGraph, scenario: &Scenario) -> Result<MilpModel, ModelError> {
    check_inputs(graph, scenario)?;
    let c = common(graph, scenario);
    let n_l = graph.num_locations();
    let n_t = scenario.horizon as usize;
    let n_a = scenario.n_robots as usize;
    let mut model = MilpModel::new("per_robot_occupancy");
    // x[t][i][l]
    let mut x = vec![vec![vec![0usize; n_l]; n_a]; n_t + 1];
    for t in 1..=n_t {
        for i in 0..n_a {
            for l in 0..n_l {
                x[t][i][l] = model.add_var(
                    format!("x_{i}_{l}_{t}"),
                    0.0,
                    1.0,
                    VarKind::Binary,
                    VarRole::X { robot: i as u32, loc: l, t: t as u32 },
                );
            }
        }
        let xt = x[t].clone();
        add_cost_block(&mut model, graph, scenario, &c, t as u32, &|l| (0..n_a).map(|i| (xt[i][l], 1.0)).collect());
    }
    let starts = scenario.start_list(graph).map_err(|e| ModelError::Invalid(e.to_string()))?;
    for (i, &b) in starts.iter().enumerate() {
        model.add_constraint(format!("start_{i}"), vec![(x[1][i][b], 1.0)], Sense::Eq, 1.0);
    }
    for g in &scenario.goals {
        let l = graph.loc_index(g.location).unwrap();
        let row = (0..n_a).map(|i| (x[n_t][i][l], 1.0)).collect();
        model.add_constraint(format!("goal_{l}"), row, Sense::Ge, g.count as f64);
    }
    for t in 1..=n_t {
        for i in 0..n_a {
            let row = (0..n_l).map(|l| (x[t][i][l], 1.0)).collect();
            model.add_constraint(format!("one_{i}_{t}"), row, Sense::Eq, 1.0);
        }
    }
    for t in 2..=n_t {
        for i in 0..n_a {
            for node in graph.nodes() {
                let mut row: Vec<(usize, f64)> =
                    graph.incoming(node.id).iter().map(|&l| (x[t - 1][i][l], 1.0)).collect();
                row.extend(graph.outgoing(node.id).iter().map(|&l| (x[t][i][l], -1.0)));
                model.add_constraint(format!("flow_{i}_{}_{t}", node.id), row, Sense::Eq, 0.0);
            }
        }
    }
    model.layout = Some(layout(graph, scenario, &c));
    Ok(model)
}

/// Team counts per time step: `counts[t - 1][l]`.
pub type Occupancy = Vec<Vec<u32>>;

/// Decoded plan with counts and the tight auxiliary values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancySolution {
    /// `p[t - 1][l]`.
    pub p: Occupancy,
    /// `phi[t - 1][k]` for the k-th non-self-loop edge.
    pub phi: Vec<Vec<bool>>,
    pub psi: Vec<bool>,
    pub c_trav: Vec<Vec<f64>>,
    pub c_ow: Vec<Vec<f64>>,
    pub objective: f64,
}

impl OccupancySolution {
    /// Builds a solution from counts alone, filling auxiliaries with the
    /// values an optimal solver would assign.
    pub fn from_counts(graph: &TopoGraph, scenario: &Scenario, p: Occupancy) -> Result<Self, ModelError> {
        let objective = evaluate_plan_cost(graph, scenario, &p)?;
        let params = scenario.params_by_loc(graph);
        let edges = graph.edge_locs();
        let by_edge = graph.overwatch_by_edge();
        let mut phi = Vec::new();
        let mut psi = Vec::new();
        let mut c_trav = Vec::new();
        let mut c_ow = Vec::new();
        for pt in &p {
            let ow: Vec<f64> = graph
                .overwatch()
                .iter()
                .map(|o| {
                    let e = graph.loc_index(o.edge).unwrap();
                    if pt[e] > 0 {
                        overwatch_cost(o, pt[graph.node_loc(o.watcher).unwrap()])
                    } else {
                        0.0
                    }
                })
                .collect();
            let tr: Vec<f64> = edges
                .iter()
                .map(|&e| {
                    if pt[e] == 0 {
                        return 0.0;
                    }
                    let benefit: f64 = by_edge.get(&e).map(|v| v.iter().map(|&o| ow[o]).sum()).unwrap_or(0.0);
                    traversal_cost(&params[e].unwrap(), pt[e]).max(1.0 - benefit).max(0.0)
                })
                .collect();
            phi.push(edges.iter().map(|&e| pt[e] > 0).collect());
            psi.push(edges.iter().any(|&e| pt[e] > 0));
            c_trav.push(tr);
            c_ow.push(ow);
        }
        Ok(Self { p, phi, psi, c_trav, c_ow, objective })
    }

    pub fn horizon(&self) -> usize {
        self.p.len()
    }
}

/// Checks start, population, flow and goal constraints for a count plan.
pub fn check_occupancy(graph: &TopoGraph, scenario: &Scenario, p: &Occupancy) -> Result<(), ModelError> {
    let bad = |m: String| Err(ModelError::InfeasiblePlan(m));
    let n_l = graph.num_locations();
    if p.len() != scenario.horizon as usize {
        return bad(format!("expected {} time steps, got {}", scenario.horizon, p.len()));
    }
    if let Some(t) = p.iter().position(|row| row.len() != n_l) {
        return bad(format!("time step {} has wrong number of locations", t + 1));
    }
    for (t, row) in p.iter().enumerate() {
        let total: u32 = row.iter().sum();
        if total != scenario.n_robots {
            return bad(format!("population {} at t={} differs from {}", total, t + 1, scenario.n_robots));
        }
    }
    let mut expect = vec![0u32; n_l];
    for s in &scenario.starts {
        expect[graph.require_loc(s.location).map_err(|e| ModelError::Invalid(e.to_string()))?] += s.count;
    }
    if p[0] != expect {
        return bad("initial counts differ from the start allocation".into());
    }
    for t in 1..p.len() {
        for node in graph.nodes() {
            let inflow: u32 = graph.incoming(node.id).iter().map(|&l| p[t - 1][l]).sum();
            let outflow: u32 = graph.outgoing(node.id).iter().map(|&l| p[t][l]).sum();
            if inflow != outflow {
                return bad(format!("flow not conserved at node {} between t={} and t={}", node.id, t, t + 1));
            }
        }
    }
    let last = p.last().unwrap();
    for g in &scenario.goals {
        let l = graph.require_loc(g.location).map_err(|e| ModelError::Invalid(e.to_string()))?;
        if last[l] < g.count {
            return bad(format!("goal ({}, {}) holds {} < {}", g.location.0, g.location.1, last[l], g.count));
        }
    }
    Ok(())
}

/// Cost of a count plan from the piecewise definitions directly.
pub fn evaluate_plan_cost(graph: &TopoGraph, scenario: &Scenario, p: &Occupancy) -> Result<f64, ModelError> {
    check_inputs(graph, scenario)?;
    check_occupancy(graph, scenario, p)?;
    let params = scenario.params_by_loc(graph);
    let by_edge = graph.overwatch_by_edge();
    let edges = graph.edge_locs();
    let mut total = 0.0;
    for (ti, pt) in p.iter().enumerate() {
        let t = (ti + 1) as f64;
        if edges.iter().any(|&e| pt[e] > 0) {
            total += scenario.time_weight * t;
        }
        for &e in &edges {
            if pt[e] == 0 {
                continue;
            }
            let mut cost = traversal_cost(&params[e].unwrap(), pt[e]);
            if let Some(opps) = by_edge.get(&e) {
                for &o in opps {
                    let opp = &graph.overwatch()[o];
                    cost += overwatch_cost(opp, pt[graph.node_loc(opp.watcher).unwrap()]);
                }
            }
            total += cost.max(1.0);
        }
    }
    Ok(total)
}

/// Reads a count plan out of a model solution vector.
pub fn decode_occupancy(model: &MilpModel, x: &[f64]) -> Result<Occupancy, ModelError> {
    let lay = model.layout.as_ref().ok_or_else(|| ModelError::Invalid("model has no occupancy layout".into()))?;
    let mut p = vec![vec![0u32; lay.n_locations]; lay.horizon as usize];
    for (v, &xv) in model.variables.iter().zip(x) {
        let r = xv.round();
        match v.role {
            VarRole::P { loc, t } => p[t as usize - 1][loc] += r.max(0.0) as u32,
            VarRole::X { loc, t, .. } => p[t as usize - 1][loc] += r.max(0.0) as u32,
            _ => {}
        }
    }
    Ok(p)
}

/// Decodes counts, indicators and auxiliary costs, keeping the solver's
/// auxiliary values rather than recomputing them.
pub fn decode_solution(model: &MilpModel, x: &[f64]) -> Result<OccupancySolution, ModelError> {
    let lay = model.layout.as_ref().ok_or_else(|| ModelError::Invalid("model has no occupancy layout".into()))?;
    let p = decode_occupancy(model, x)?;
    let n_t = lay.horizon as usize;
    let edge_pos: std::collections::HashMap<LocId, usize> =
        lay.edge_locs.iter().enumerate().map(|(k, &l)| (l, k)).collect();
    let mut phi = vec![vec![false; lay.edge_locs.len()]; n_t];
    let mut c_trav = vec![vec![0.0; lay.edge_locs.len()]; n_t];
    let mut c_ow = vec![vec![0.0; lay.n_overwatch]; n_t];
    let mut psi = vec![false; n_t];
    for (v, &xv) in model.variables.iter().zip(x) {
        match v.role {
            VarRole::Phi { loc, t } => phi[t as usize - 1][edge_pos[&loc]] = xv > 0.5,
            VarRole::Psi { t } => psi[t as usize - 1] = xv > 0.5,
            VarRole::TravCost { loc, t } => c_trav[t as usize - 1][edge_pos[&loc]] = xv,
            VarRole::OwCost { opp, t } => c_ow[t as usize - 1][opp] = xv,
            _ => {}
        }
    }
    Ok(OccupancySolution { p, phi, psi, c_trav, c_ow, objective: model.objective_value(x) })
}

/// Robots at node `v` at 1-based time `t`.
pub fn node_count(graph: &TopoGraph, p: &Occupancy, v: NodeId, t: usize) -> u32 {
    graph.node_loc(v).map(|l| p[t - 1][l]).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtg::{LocCount, Node};
    use crate::fixtures;
    use std::collections::BTreeMap;

    #[test]
    fn closed_form_matches_table_shapes() {
        assert_eq!(variable_count(17, 12, 4, 10), 460);
        assert_eq!(variable_count(43, 32, 8, 10), 1160);
        assert_eq!(variable_count(32, 24, 18, 10), 990);
        assert_eq!(variable_count(51, 36, 32, 12), 1872);
        assert_eq!(variable_count(1, 0, 0, 3), 6);
    }

    #[test]
    fn illustrative_model_size() {
        let (g, s) = fixtures::illustrative();
        let m = build_milp(&g, &s).unwrap();
        assert_eq!(m.num_vars(), 460);
        m.check_references().unwrap();
    }

    #[test]
    fn bounding_model_size() {
        let (g, s) = fixtures::bounding();
        assert_eq!(g.num_locations(), 43);
        assert_eq!(g.overwatch().len(), 8);
        assert_eq!(build_milp(&g, &s).unwrap().num_vars(), 1160);
    }

    #[test]
    fn single_node_model() {
        let g = TopoGraph::from_undirected(&[1], &[]).unwrap();
        let s = Scenario::simple(&g, 1, 1, 1, 1, 1, EdgeCostParams::plain(1.0));
        let m = build_milp(&g, &s).unwrap();
        let names: Vec<_> = m.variables.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(names, vec!["p_0_1", "psi_1"]);
        let x = vec![1.0, 0.0];
        m.check_point(&x, 1e-9, 1e-9).unwrap();
        assert_eq!(m.objective_value(&x), 0.0);
    }

    #[test]
    fn gmip_size() {
        let (g, s) = fixtures::illustrative();
        let m = build_gmip(&g, &s).unwrap();
        let xs = m.variables.iter().filter(|v| matches!(v.role, VarRole::X { .. })).count();
        assert_eq!(xs, 1700);
        assert_eq!(m.num_vars(), 1700 + 10 * (2 * 12 + 4 + 1));
    }

    #[test]
    fn rejects_nonconvex_traversal() {
        let (g, mut s) = fixtures::illustrative();
        let e = s.edge_params[0].edge;
        s.set_params(e, EdgeCostParams { w_bar: 1.0, a: 2, m: 0.5, r: 1.0 });
        let err = build_milp(&g, &s).unwrap_err();
        assert!(err.to_string().contains("m_e < r_e"), "{err}");
    }

    #[test]
    fn relaxation_is_linear_continuous() {
        let (g, s) = fixtures::illustrative();
        let m = build_milp(&g, &s).unwrap().relaxed();
        assert!(m.variables.iter().all(|v| v.kind == VarKind::Continuous));
        assert!(m.constraints.iter().all(|c| c.terms.iter().all(|t| t.1.is_finite())));
    }

    fn two_node(w: f64, tw: f64) -> (TopoGraph, Scenario) {
        let g = TopoGraph::from_undirected(&[1, 2], &[(1, 2)]).unwrap();
        let mut s = Scenario::simple(&g, 1, 3, 1, 2, 1, EdgeCostParams::plain(w));
        s.time_weight = tw;
        (g, s)
    }

    #[test]
    fn parked_plan_costs_nothing() {
        let (g, mut s) = two_node(5.0, 1.0);
        s.goals.clear();
        let home = g.node_loc(NodeId(1)).unwrap();
        let mut row = vec![0; g.num_locations()];
        row[home] = 1;
        assert_eq!(evaluate_plan_cost(&g, &s, &vec![row.clone(); 3]).unwrap(), 0.0);
    }

    #[test]
    fn single_crossing_costs_edge_weight() {
        let (g, s) = two_node(10.0, 0.0);
        let (a, e, b) = (
            g.node_loc(NodeId(1)).unwrap(),
            g.loc_index((NodeId(1), NodeId(2))).unwrap(),
            g.node_loc(NodeId(2)).unwrap(),
        );
        let mk = |l: usize| {
            let mut r = vec![0; g.num_locations()];
            r[l] = 1;
            r
        };
        let p = vec![mk(a), mk(e), mk(b)];
        assert_eq!(evaluate_plan_cost(&g, &s, &p).unwrap(), 10.0);
        let (_, s1) = two_node(10.0, 1.0);
        assert_eq!(evaluate_plan_cost(&g, &s1, &p).unwrap(), 12.0);
        // teleporting is rejected
        assert!(evaluate_plan_cost(&g, &s, &vec![mk(a), mk(b), mk(b)]).is_err());
    }

    #[test]
    fn overwatch_and_floor_apply() {
        let nodes = (1..=3).map(|i| Node { id: NodeId(i), x: i as f64, y: 0.0 }).collect();
        let edges = vec![(NodeId(1), NodeId(2)), (NodeId(2), NodeId(1))];
        let ow = vec![OverwatchOpportunity {
            watcher: NodeId(3),
            edge: (NodeId(1), NodeId(2)),
            omega: 8.0,
            alpha: 2,
            gamma: 1.0,
        }];
        let g = TopoGraph::new(nodes, edges, BTreeMap::new(), ow).unwrap();
        let mut s = Scenario::simple(&g, 3, 2, 1, 2, 0, EdgeCostParams::plain(10.0));
        s.time_weight = 0.0;
        s.starts = vec![
            LocCount { location: (NodeId(1), NodeId(1)), count: 1 },
            LocCount { location: (NodeId(3), NodeId(3)), count: 2 },
        ];
        s.goals.clear();
        let mut r0 = vec![0; g.num_locations()];
        r0[g.node_loc(NodeId(1)).unwrap()] = 1;
        r0[g.node_loc(NodeId(3)).unwrap()] = 2;
        let mut r1 = vec![0; g.num_locations()];
        r1[g.loc_index((NodeId(1), NodeId(2))).unwrap()] = 1;
        r1[g.node_loc(NodeId(3)).unwrap()] = 2;
        // 10 - 8 with two watchers
        assert_eq!(evaluate_plan_cost(&g, &s, &vec![r0.clone(), r1.clone()]).unwrap(), 2.0);
        let mut big = g.overwatch().to_vec();
        big[0].omega = 20.0;
        big[0].gamma = 0.0;
        let g2 = g.clone().with_overwatch(big).unwrap();
        assert_eq!(evaluate_plan_cost(&g2, &s, &vec![r0, r1]).unwrap(), 1.0);
    }

    #[test]
    fn from_counts_is_consistent_with_model_rows() {
        let (g, s) = fixtures::illustrative();
        let p = fixtures::illustrative_direct_plan(&g, &s);
        let sol = OccupancySolution::from_counts(&g, &s, p).unwrap();
        let m = build_milp(&g, &s).unwrap();
        let x = encode_for_test(&m, &sol);
        m.check_point(&x, 1e-9, 1e-9).unwrap();
        assert!((m.objective_value(&x) - sol.objective).abs() < 1e-9);
    }

    pub(crate) fn encode_for_test(m: &MilpModel, sol: &OccupancySolution) -> Vec<f64> {
        let lay = m.layout.as_ref().unwrap();
        let pos: std::collections::HashMap<_, _> = lay.edge_locs.iter().enumerate().map(|(k, &l)| (l, k)).collect();
        m.variables
            .iter()
            .map(|v| match v.role {
                VarRole::P { loc, t } => sol.p[t as usize - 1][loc] as f64,
                VarRole::Phi { loc, t } => sol.phi[t as usize - 1][pos[&loc]] as u8 as f64,
                VarRole::Psi { t } => sol.psi[t as usize - 1] as u8 as f64,
                VarRole::TravCost { loc, t } => sol.c_trav[t as usize - 1][pos[&loc]],
                VarRole::OwCost { opp, t } => sol.c_ow[t as usize - 1][opp],
                _ => 0.0,
            })
            .collect()
    }
}
