//! Dynamic topological graph, scenario definition and graph-state semantics.
//!
//! Locations are the union of directed edges and nodes; every node is stored
//! as its self-loop `(v, v)`, so a single index space covers both. Location
//! indices are assigned in `(source, target)` order and never change after
//! construction.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a graph node as it appears in input files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index into [`TopoGraph::locations`].
pub type LocId = usize;

/// A directed ordered node pair. Self-loops encode nodes.
pub type Loc = (NodeId, NodeId);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DtgError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown location ({0}, {1})")]
    UnknownLocation(NodeId, NodeId),
    #[error("location index {0} out of range")]
    LocationOutOfRange(LocId),
    #[error("duplicate node {0}")]
    DuplicateNode(NodeId),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(NodeId, NodeId),
    #[error("overwatch opportunity {index} is invalid: {reason}")]
    BadOverwatch { index: usize, reason: String },
    #[error("edge path for ({0}, {1}) must contain at least one point")]
    EmptyPath(NodeId, NodeId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
}

/// A node that can watch traversals of one edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverwatchOpportunity {
    pub watcher: NodeId,
    pub edge: Loc,
    /// Benefit of full overwatch.
    pub omega: f64,
    /// Robots needed at the watcher for the full benefit.
    pub alpha: u32,
    /// Additional reward per watcher beyond `alpha`.
    pub gamma: f64,
}

/// Per-edge traversal cost parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeCostParams {
    /// Fixed cost for a team to traverse the edge.
    pub w_bar: f64,
    /// Minimum desired coalition size.
    pub a: u32,
    /// Penalty per robot short of `a`.
    pub m: f64,
    /// Reward per robot beyond `a`.
    pub r: f64,
}

impl EdgeCostParams {
    pub fn plain(w_bar: f64) -> Self {
        Self { w_bar, a: 1, m: 0.0, r: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EdgePathWire {
    from: NodeId,
    to: NodeId,
    points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphWire {
    nodes: Vec<Node>,
    edges: Vec<Loc>,
    #[serde(default)]
    edge_paths: Vec<EdgePathWire>,
    #[serde(default)]
    overwatch: Vec<OverwatchOpportunity>,
}

/// Directed graph with self-loops on every node and optional overwatch opportunities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphWire", into = "GraphWire")]
pub struct TopoGraph {
    nodes: Vec<Node>,
    locations: Vec<Loc>,
    edge_paths: BTreeMap<Loc, Vec<[f64; 2]>>,
    overwatch: Vec<OverwatchOpportunity>,
    #[serde(skip)]
    index: HashMap<Loc, LocId>,
    #[serde(skip)]
    outgoing: Vec<Vec<LocId>>,
    #[serde(skip)]
    incoming: Vec<Vec<LocId>>,
    #[serde(skip)]
    node_pos: HashMap<NodeId, usize>,
}

impl TopoGraph {
    /// Builds a graph from nodes and directed edges. Self-loops are added for
    /// every node; listing them explicitly is an error only if duplicated.
    pub fn new(
        nodes: Vec<Node>,
        edges: Vec<Loc>,
        edge_paths: BTreeMap<Loc, Vec<[f64; 2]>>,
        overwatch: Vec<OverwatchOpportunity>,
    ) -> Result<Self, DtgError> {
        let mut nodes = nodes;
        nodes.sort_by_key(|n| n.id);
        for pair in nodes.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(DtgError::DuplicateNode(pair[0].id));
            }
        }
        let node_pos: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();

        let mut set = BTreeSet::new();
        for &(a, b) in &edges {
            for v in [a, b] {
                if !node_pos.contains_key(&v) {
                    return Err(DtgError::UnknownNode(v));
                }
            }
            if !set.insert((a, b)) {
                return Err(DtgError::DuplicateEdge(a, b));
            }
        }
        for n in &nodes {
            set.insert((n.id, n.id));
        }
        let locations: Vec<Loc> = set.into_iter().collect();
        let index: HashMap<Loc, LocId> = locations.iter().enumerate().map(|(i, &l)| (l, i)).collect();

        for (&(a, b), pts) in &edge_paths {
            if !index.contains_key(&(a, b)) {
                return Err(DtgError::UnknownLocation(a, b));
            }
            if pts.is_empty() {
                return Err(DtgError::EmptyPath(a, b));
            }
        }
        for (i, o) in overwatch.iter().enumerate() {
            if !node_pos.contains_key(&o.watcher) {
                return Err(DtgError::BadOverwatch {
                    index: i,
                    reason: format!("watcher {} is not a node", o.watcher),
                });
            }
            if o.edge.0 == o.edge.1 || !index.contains_key(&o.edge) {
                return Err(DtgError::BadOverwatch {
                    index: i,
                    reason: format!("({}, {}) is not a traversable edge", o.edge.0, o.edge.1),
                });
            }
        }

        let mut outgoing = vec![Vec::new(); nodes.len()];
        let mut incoming = vec![Vec::new(); nodes.len()];
        for (l, &(a, b)) in locations.iter().enumerate() {
            outgoing[node_pos[&a]].push(l);
            incoming[node_pos[&b]].push(l);
        }

        Ok(Self { nodes, locations, edge_paths, overwatch, index, outgoing, incoming, node_pos })
    }

    /// Convenience constructor for tests and synthetic graphs: nodes without
    /// coordinates and undirected edges expanded to both directions.
    pub fn from_undirected(node_ids: &[u32], pairs: &[(u32, u32)]) -> Result<Self, DtgError> {
        let nodes = node_ids.iter().enumerate().map(|(i, &id)| Node { id: NodeId(id), x: i as f64, y: 0.0 }).collect();
        let mut edges = Vec::new();
        for &(a, b) in pairs {
            edges.push((NodeId(a), NodeId(b)));
            edges.push((NodeId(b), NodeId(a)));
        }
        Self::new(nodes, edges, BTreeMap::new(), Vec::new())
    }

    pub fn with_overwatch(mut self, overwatch: Vec<OverwatchOpportunity>) -> Result<Self, DtgError> {
        let nodes = std::mem::take(&mut self.nodes);
        let edges = self.nontrivial_edges();
        Self::new(nodes, edges, std::mem::take(&mut self.edge_paths), overwatch)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.node_pos.get(&id).map(|&i| &self.nodes[i])
    }

    pub fn locations(&self) -> &[Loc] {
        &self.locations
    }

    pub fn num_locations(&self) -> usize {
        self.locations.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Number of directed edges excluding self-loops.
    pub fn num_edges(&self) -> usize {
        self.locations.len() - self.nodes.len()
    }

    pub fn overwatch(&self) -> &[OverwatchOpportunity] {
        &self.overwatch
    }

    pub fn edge_paths(&self) -> &BTreeMap<Loc, Vec<[f64; 2]>> {
        &self.edge_paths
    }

    pub fn edge_path(&self, loc: Loc) -> Option<&[[f64; 2]]> {
        self.edge_paths.get(&loc).map(|v| v.as_slice())
    }

    pub fn loc_index(&self, loc: Loc) -> Option<LocId> {
        self.index.get(&loc).copied()
    }

    pub fn require_loc(&self, loc: Loc) -> Result<LocId, DtgError> {
        self.loc_index(loc).ok_or(DtgError::UnknownLocation(loc.0, loc.1))
    }

    pub fn node_loc(&self, v: NodeId) -> Option<LocId> {
        self.loc_index((v, v))
    }

    pub fn location(&self, l: LocId) -> Loc {
        self.locations[l]
    }

    pub fn is_self_loop(&self, l: LocId) -> bool {
        let (a, b) = self.locations[l];
        a == b
    }

    /// Location indices of non-self-loop edges, in location order.
    pub fn edge_locs(&self) -> Vec<LocId> {
        (0..self.locations.len()).filter(|&l| !self.is_self_loop(l)).collect()
    }

    fn nontrivial_edges(&self) -> Vec<Loc> {
        self.locations.iter().copied().filter(|(a, b)| a != b).collect()
    }

    /// Locations `(v, *)`, including the self-loop.
    pub fn outgoing(&self, v: NodeId) -> &[LocId] {
        self.node_pos.get(&v).map(|&i| self.outgoing[i].as_slice()).unwrap_or(&[])
    }

    /// Locations `(*, v)`, including the self-loop.
    pub fn incoming(&self, v: NodeId) -> &[LocId] {
        self.node_pos.get(&v).map(|&i| self.incoming[i].as_slice()).unwrap_or(&[])
    }

    /// Locations reachable in one step from `loc = (v_j, v_k)`: every `(v_k, v_l)`.
    pub fn next_edge_action_set(&self, loc: LocId) -> Result<&[LocId], DtgError> {
        let &(_, head) = self.locations.get(loc).ok_or(DtgError::LocationOutOfRange(loc))?;
        Ok(self.outgoing(head))
    }

    /// Same as [`Self::next_edge_action_set`] keyed by node pair.
    pub fn next_locations(&self, loc: Loc) -> Result<Vec<Loc>, DtgError> {
        let l = self.require_loc(loc)?;
        Ok(self.next_edge_action_set(l)?.iter().map(|&i| self.locations[i]).collect())
    }

    /// Overwatch opportunities grouped by watched edge location.
    pub fn overwatch_by_edge(&self) -> BTreeMap<LocId, Vec<usize>> {
        let mut out: BTreeMap<LocId, Vec<usize>> = BTreeMap::new();
        for (i, o) in self.overwatch.iter().enumerate() {
            out.entry(self.index[&o.edge]).or_default().push(i);
        }
        out
    }

    /// Euclidean length of the stored polyline for `loc`, or the straight-line
    /// node distance when no polyline is stored.
    pub fn edge_length(&self, loc: Loc) -> f64 {
        match self.edge_paths.get(&loc) {
            Some(pts) => pts.windows(2).map(|w| dist(w[0], w[1])).sum(),
            None => match (self.node(loc.0), self.node(loc.1)) {
                (Some(a), Some(b)) => ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt(),
                _ => 0.0,
            },
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl TryFrom<GraphWire> for TopoGraph {
    type Error = DtgError;

    fn try_from(w: GraphWire) -> Result<Self, Self::Error> {
        let edges = w.edges.into_iter().filter(|(a, b)| a != b).collect();
        let paths = w.edge_paths.into_iter().map(|p| ((p.from, p.to), p.points)).collect();
        TopoGraph::new(w.nodes, edges, paths, w.overwatch)
    }
}

impl From<TopoGraph> for GraphWire {
    fn from(g: TopoGraph) -> Self {
        let edges = g.nontrivial_edges();
        GraphWire {
            nodes: g.nodes,
            edges,
            edge_paths: g
                .edge_paths
                .into_iter()
                .map(|((from, to), points)| EdgePathWire { from, to, points })
                .collect(),
            overwatch: g.overwatch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocCount {
    pub location: Loc,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeParamEntry {
    pub edge: Loc,
    #[serde(flatten)]
    pub params: EdgeCostParams,
}

fn default_time_weight() -> f64 {
    1.0
}

/// Team size, horizon, start and goal allocations and the edge cost parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n_robots: u32,
    pub horizon: u32,
    pub starts: Vec<LocCount>,
    pub goals: Vec<LocCount>,
    pub edge_params: Vec<EdgeParamEntry>,
    #[serde(default = "default_time_weight")]
    pub time_weight: f64,
}

impl Scenario {
    /// Scenario with every robot starting on node `start` and `goal_count`
    /// robots required at node `goal`; all edges get `params`.
    pub fn simple(
        graph: &TopoGraph,
        n_robots: u32,
        horizon: u32,
        start: u32,
        goal: u32,
        goal_count: u32,
        params: EdgeCostParams,
    ) -> Self {
        let edge_params =
            graph.edge_locs().into_iter().map(|l| EdgeParamEntry { edge: graph.location(l), params }).collect();
        Self {
            n_robots,
            horizon,
            starts: vec![LocCount { location: (NodeId(start), NodeId(start)), count: n_robots }],
            goals: vec![LocCount { location: (NodeId(goal), NodeId(goal)), count: goal_count }],
            edge_params,
            time_weight: 1.0,
        }
    }

    pub fn params_for(&self, edge: Loc) -> Option<&EdgeCostParams> {
        self.edge_params.iter().find(|e| e.edge == edge).map(|e| &e.params)
    }

    pub fn set_params(&mut self, edge: Loc, params: EdgeCostParams) {
        match self.edge_params.iter_mut().find(|e| e.edge == edge) {
            Some(e) => e.params = params,
            None => self.edge_params.push(EdgeParamEntry { edge, params }),
        }
    }

    /// Edge parameters indexed by location; `None` for self-loops and edges
    /// without an entry.
    pub fn params_by_loc(&self, graph: &TopoGraph) -> Vec<Option<EdgeCostParams>> {
        let mut out = vec![None; graph.num_locations()];
        for e in &self.edge_params {
            if let Some(l) = graph.loc_index(e.edge) {
                if !graph.is_self_loop(l) {
                    out[l] = Some(e.params);
                }
            }
        }
        out
    }

    /// Start locations expanded to one entry per robot, in location order.
    pub fn start_list(&self, graph: &TopoGraph) -> Result<Vec<LocId>, DtgError> {
        let mut out = Vec::with_capacity(self.n_robots as usize);
        for s in &self.starts {
            let l = graph.require_loc(s.location)?;
            out.extend(std::iter::repeat_n(l, s.count as usize));
        }
        out.sort_unstable();
        Ok(out)
    }
}

/// Location of every robot at one time step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphTeamState {
    pub locations: Vec<LocId>,
}

impl GraphTeamState {
    pub fn new(graph: &TopoGraph, locations: Vec<LocId>) -> Result<Self, DtgError> {
        if let Some(&bad) = locations.iter().find(|&&l| l >= graph.num_locations()) {
            return Err(DtgError::LocationOutOfRange(bad));
        }
        Ok(Self { locations })
    }

    /// Robot counts per location.
    pub fn counts(&self, n_locations: usize) -> Vec<u32> {
        let mut c = vec![0; n_locations];
        for &l in &self.locations {
            c[l] += 1;
        }
        c
    }
}

/// A broken invariant reported by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    MissingSelfLoop(NodeId),
    StartCountMismatch { sum: u32, n_robots: u32 },
    UnknownStart(Loc),
    UnknownGoal(Loc),
    GoalsExceedTeam { sum: u32, n_robots: u32 },
    NoRobots,
    NoHorizon,
    NegativeTimeWeight,
    MissingEdgeParams(Loc),
    ParamsOnNonEdge(Loc),
    NonPositiveEdgeWeight(Loc),
    ZeroMinimumRobots(Loc),
    NegativePenalty(Loc),
    PenaltyBelowReward(Loc),
    NonPositiveOmega(usize),
    ZeroAlpha(usize),
    NegativeGamma(usize),
    OverwatchNotConvex(usize),
    GoalUnreachable(Loc),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            MissingSelfLoop(v) => write!(f, "node {v} has no self-loop"),
            StartCountMismatch { sum, n_robots } => {
                write!(f, "start counts ≠ n_A ({sum} vs {n_robots})")
            }
            UnknownStart((a, b)) => write!(f, "start location ({a}, {b}) does not exist"),
            UnknownGoal((a, b)) => write!(f, "goal location ({a}, {b}) does not exist"),
            GoalsExceedTeam { sum, n_robots } => {
                write!(f, "goal minima {sum} exceed team size {n_robots}")
            }
            NoRobots => write!(f, "team size must be positive"),
            NoHorizon => write!(f, "horizon must be positive"),
            NegativeTimeWeight => write!(f, "time weight must be nonnegative"),
            MissingEdgeParams((a, b)) => write!(f, "edge ({a}, {b}) has no cost parameters"),
            ParamsOnNonEdge((a, b)) => write!(f, "cost parameters given for non-edge ({a}, {b})"),
            NonPositiveEdgeWeight((a, b)) => write!(f, "edge ({a}, {b}): w_bar must be positive"),
            ZeroMinimumRobots((a, b)) => write!(f, "edge ({a}, {b}): a_e must be at least 1"),
            NegativePenalty((a, b)) => write!(f, "edge ({a}, {b}): m_e and r_e must be nonnegative"),
            PenaltyBelowReward((a, b)) => write!(f, "edge ({a}, {b}): m_e < r_e breaks convexity"),
            NonPositiveOmega(i) => write!(f, "overwatch {i}: omega must be positive"),
            ZeroAlpha(i) => write!(f, "overwatch {i}: alpha must be at least 1"),
            NegativeGamma(i) => write!(f, "overwatch {i}: gamma must be nonnegative"),
            OverwatchNotConvex(i) => write!(f, "overwatch {i}: omega/alpha < gamma breaks convexity"),
            GoalUnreachable((a, b)) => write!(f, "goal unreachable in horizon: ({a}, {b})"),
        }
    }
}

/// Checks all graph and scenario invariants. An empty result means the pair
/// can be handed to the model builders.
pub fn validate(graph: &TopoGraph, scenario: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    for n in graph.nodes() {
        if graph.node_loc(n.id).is_none() {
            out.push(Violation::MissingSelfLoop(n.id));
        }
    }
    if scenario.n_robots == 0 {
        out.push(Violation::NoRobots);
    }
    if scenario.horizon == 0 {
        out.push(Violation::NoHorizon);
    }
    if !(scenario.time_weight >= 0.0) {
        out.push(Violation::NegativeTimeWeight);
    }
    let start_sum: u32 = scenario.starts.iter().map(|s| s.count).sum();
    if start_sum != scenario.n_robots {
        out.push(Violation::StartCountMismatch { sum: start_sum, n_robots: scenario.n_robots });
    }
    for s in &scenario.starts {
        if graph.loc_index(s.location).is_none() {
            out.push(Violation::UnknownStart(s.location));
        }
    }
    let goal_sum: u32 = scenario.goals.iter().map(|g| g.count).sum();
    if goal_sum > scenario.n_robots {
        out.push(Violation::GoalsExceedTeam { sum: goal_sum, n_robots: scenario.n_robots });
    }
    for g in &scenario.goals {
        if graph.loc_index(g.location).is_none() {
            out.push(Violation::UnknownGoal(g.location));
        }
    }

    let params = scenario.params_by_loc(graph);
    for e in &scenario.edge_params {
        match graph.loc_index(e.edge) {
            Some(l) if !graph.is_self_loop(l) => {}
            _ => out.push(Violation::ParamsOnNonEdge(e.edge)),
        }
    }
    for l in graph.edge_locs() {
        let loc = graph.location(l);
        match params[l] {
            None => out.push(Violation::MissingEdgeParams(loc)),
            Some(p) => {
                if !(p.w_bar > 0.0) {
                    out.push(Violation::NonPositiveEdgeWeight(loc));
                }
                if p.a == 0 {
                    out.push(Violation::ZeroMinimumRobots(loc));
                }
                if !(p.m >= 0.0 && p.r >= 0.0) {
                    out.push(Violation::NegativePenalty(loc));
                } else if p.m < p.r {
                    out.push(Violation::PenaltyBelowReward(loc));
                }
            }
        }
    }
    for (i, o) in graph.overwatch().iter().enumerate() {
        if !(o.omega > 0.0) {
            out.push(Violation::NonPositiveOmega(i));
        }
        if o.alpha == 0 {
            out.push(Violation::ZeroAlpha(i));
        }
        if !(o.gamma >= 0.0) {
            out.push(Violation::NegativeGamma(i));
        }
        if o.alpha > 0 && o.omega / o.alpha as f64 + 1e-12 < o.gamma {
            out.push(Violation::OverwatchNotConvex(i));
        }
    }

    let starts_known = scenario.starts.iter().all(|s| graph.loc_index(s.location).is_some());
    if starts_known && scenario.horizon > 0 {
        let reach = reachable_at_horizon(graph, scenario);
        for g in &scenario.goals {
            if let Some(l) = graph.loc_index(g.location) {
                if g.count > 0 && !reach[l] {
                    out.push(Violation::GoalUnreachable(g.location));
                }
            }
        }
    }
    out
}

/// Locations some robot can occupy at the final time step.
fn reachable_at_horizon(graph: &TopoGraph, scenario: &Scenario) -> Vec<bool> {
    let mut cur = vec![false; graph.num_locations()];
    for s in &scenario.starts {
        if s.count > 0 {
            if let Some(l) = graph.loc_index(s.location) {
                cur[l] = true;
            }
        }
    }
    for _ in 1..scenario.horizon {
        let mut next = vec![false; cur.len()];
        for (l, &on) in cur.iter().enumerate() {
            if on {
                for &n in graph.next_edge_action_set(l).expect("index in range") {
                    next[n] = true;
                }
            }
        }
        cur = next;
    }
    cur
}
