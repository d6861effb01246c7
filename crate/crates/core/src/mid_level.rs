//! Per-robot routes from occupancy counts, coalition roles, and receding
//! goals along edge polylines.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtg::{Loc, LocId, TopoGraph};
use crate::milp::Occupancy;

#[derive(Debug, Error, PartialEq)]
pub enum MidLevelError {
    #[error("occupancy is empty or has the wrong number of locations")]
    Shape,
    #[error("occupancy holds {found} robots at t=1, expected {expected}")]
    Population { expected: u32, found: u32 },
    #[error("robot {robot} has no admissible location at t={t}")]
    Stuck { robot: usize, t: usize },
}

/// `routes[i][t]` is robot i's location index at time step t + 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotRoutes {
    pub routes: Vec<Vec<LocId>>,
}

impl RobotRoutes {
    pub fn n_robots(&self) -> usize {
        self.routes.len()
    }

    pub fn horizon(&self) -> usize {
        self.routes.first().map_or(0, Vec::len)
    }

    /// Counts per (t, location); equals the allocated occupancy.
    pub fn aggregate(&self, n_locations: usize) -> Occupancy {
        let mut p = vec![vec![0u32; n_locations]; self.horizon()];
        for route in &self.routes {
            for (t, &l) in route.iter().enumerate() {
                p[t][l] += 1;
            }
        }
        p
    }

    /// Routes as node pairs.
    pub fn as_locations(&self, graph: &TopoGraph) -> Vec<Vec<Loc>> {
        self.routes.iter().map(|r| r.iter().map(|&l| graph.location(l)).collect()).collect()
    }

    /// Every consecutive pair is in the next-edge action set.
    pub fn respects_adjacency(&self, graph: &TopoGraph) -> bool {
        self.routes
            .iter()
            .all(|r| r.windows(2).all(|w| graph.next_edge_action_set(w[0]).map(|a| a.contains(&w[1])).unwrap_or(false)))
    }
}

/// Greedy first-fit route extraction. Robots are processed in order; at each
/// step a robot takes the first location (by index) that still has count and
/// is reachable from its previous location.
pub fn allocate_routes(graph: &TopoGraph, p: &Occupancy, n_robots: u32) -> Result<RobotRoutes, MidLevelError> {
    let n_l = graph.num_locations();
    if p.is_empty() || p.iter().any(|row| row.len() != n_l) {
        return Err(MidLevelError::Shape);
    }
    let found: u32 = p[0].iter().sum();
    if found != n_robots {
        return Err(MidLevelError::Population { expected: n_robots, found });
    }
    let mut left = p.clone();
    let mut routes = Vec::with_capacity(n_robots as usize);
    for i in 0..n_robots as usize {
        let b = left[0].iter().position(|&c| c > 0).ok_or(MidLevelError::Stuck { robot: i, t: 1 })?;
        left[0][b] -= 1;
        let mut route = vec![b];
        for t in 1..p.len() {
            let prev = *route.last().unwrap();
            let next = graph
                .next_edge_action_set(prev)
                .ok()
                .and_then(|a| a.iter().copied().find(|&l| left[t][l] > 0))
                .ok_or(MidLevelError::Stuck { robot: i, t: t + 1 })?;
            left[t][next] -= 1;
            route.push(next);
        }
        routes.push(route);
    }
    Ok(RobotRoutes { routes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Leader,
    /// Position in the line behind the leader, starting at 1.
    Follower(u32),
}

impl Role {
    pub fn rank(self) -> u32 {
        match self {
            Role::Leader => 0,
            Role::Follower(k) => k,
        }
    }
}

/// Orders a coalition by name; the first is the leader.
pub fn assign_roles<S: AsRef<str>>(coalition: &[S]) -> Vec<(String, Role)> {
    let mut names: Vec<&str> = coalition.iter().map(AsRef::as_ref).collect();
    names.sort_unstable();
    names
        .into_iter()
        .enumerate()
        .map(|(k, n)| (n.to_string(), if k == 0 { Role::Leader } else { Role::Follower(k as u32) }))
        .collect()
}

/// Polyline with cumulative arc length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcPath {
    pub points: Vec<[f64; 2]>,
    pub arclen: Vec<f64>,
}

impl ArcPath {
    pub fn new(points: Vec<[f64; 2]>) -> Self {
        assert!(!points.is_empty(), "polyline must be nonempty");
        let mut arclen = vec![0.0; points.len()];
        for i in 1..points.len() {
            arclen[i] = arclen[i - 1] + dist(points[i - 1], points[i]);
        }
        Self { points, arclen }
    }

    pub fn length(&self) -> f64 {
        *self.arclen.last().unwrap()
    }

    pub fn end(&self) -> [f64; 2] {
        *self.points.last().unwrap()
    }

    /// Arc length of the closest point to `p`, and that point.
    pub fn project(&self, p: [f64; 2]) -> (f64, [f64; 2]) {
        if self.points.len() == 1 {
            return (0.0, self.points[0]);
        }
        let mut best = (f64::INFINITY, 0.0, self.points[0]);
        for i in 0..self.points.len() - 1 {
            let (a, b) = (self.points[i], self.points[i + 1]);
            let d = [b[0] - a[0], b[1] - a[1]];
            let len2 = d[0] * d[0] + d[1] * d[1];
            let u =
                if len2 > 0.0 { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let q = [a[0] + u * d[0], a[1] + u * d[1]];
            let dq = dist(p, q);
            if dq < best.0 {
                best = (dq, self.arclen[i] + u * len2.sqrt(), q);
            }
        }
        (best.1, best.2)
    }

    fn segment_at(&self, s: f64) -> usize {
        match self.arclen.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(i) => i.min(self.points.len().saturating_sub(2)),
            Err(i) => i.saturating_sub(1).min(self.points.len().saturating_sub(2)),
        }
    }

    /// Point at arc length `s`, clamped to the ends.
    pub fn point_at(&self, s: f64) -> [f64; 2] {
        if self.points.len() == 1 {
            return self.points[0];
        }
        let s = s.clamp(0.0, self.length());
        let i = self.segment_at(s);
        let seg = self.arclen[i + 1] - self.arclen[i];
        let u = if seg > 0.0 { (s - self.arclen[i]) / seg } else { 0.0 };
        let (a, b) = (self.points[i], self.points[i + 1]);
        [a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])]
    }

    /// Direction of travel at arc length `s`.
    pub fn heading_at(&self, s: f64) -> f64 {
        if self.points.len() == 1 {
            return 0.0;
        }
        let mut i = self.segment_at(s.clamp(0.0, self.length()));
        // skip zero-length segments
        while i + 1 < self.points.len() - 1 && self.arclen[i + 1] == self.arclen[i] {
            i += 1;
        }
        let (a, b) = (self.points[i], self.points[i + 1]);
        (b[1] - a[1]).atan2(b[0] - a[0])
    }

    /// Contiguous piece between arc lengths `s0 <= s1`.
    pub fn sub_path(&self, s0: f64, s1: f64) -> Vec<[f64; 2]> {
        let (s0, s1) = (s0.clamp(0.0, self.length()), s1.clamp(0.0, self.length()));
        let mut out = vec![self.point_at(s0)];
        for (i, &s) in self.arclen.iter().enumerate() {
            if s > s0 && s < s1 {
                out.push(self.points[i]);
            }
        }
        if s1 > s0 {
            out.push(self.point_at(s1));
        }
        out
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeaderParams {
    pub v_max: f64,
    /// Planning horizon in seconds.
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidRangePlan {
    pub robot: String,
    pub role: Role,
    /// Arc length of the robot's projection onto the edge path.
    pub start_s: f64,
    pub goal_s: f64,
    pub goal: [f64; 2],
    /// Heading of the path at the goal.
    pub goal_heading: f64,
    /// Path from the projection to the goal (a single point when the goal is
    /// not ahead).
    pub segment: Vec<[f64; 2]>,
}

/// Leader goals run `v_max * horizon` ahead of the robot's projection;
/// follower goals trail the predecessor's goal by `follow_dist`.
pub fn make_mid_range_plan(
    robot: &str,
    role: Role,
    path: &ArcPath,
    pose: [f64; 2],
    leader: LeaderParams,
    follow_dist: f64,
    predecessor_goal: Option<f64>,
) -> MidRangePlan {
    let (start_s, _) = path.project(pose);
    let goal_s = match (role, predecessor_goal) {
        (Role::Follower(_), Some(pg)) => (pg - follow_dist).max(0.0),
        _ => (start_s + leader.v_max * leader.horizon).min(path.length()),
    };
    MidRangePlan {
        robot: robot.to_string(),
        role,
        start_s,
        goal_s,
        goal: path.point_at(goal_s),
        goal_heading: path.heading_at(goal_s),
        segment: path.sub_path(start_s, goal_s.max(start_s)),
    }
}

/// Plans for a whole coalition in role order; `poses` follows `roles`.
pub fn coalition_plans(
    roles: &[(String, Role)],
    poses: &[[f64; 2]],
    path: &ArcPath,
    leader: LeaderParams,
    follow_dist: f64,
) -> Vec<MidRangePlan> {
    let mut out: Vec<MidRangePlan> = Vec::with_capacity(roles.len());
    for ((name, role), &pose) in roles.iter().zip(poses) {
        let pred = out.last().map(|p| p.goal_s);
        out.push(make_mid_range_plan(name, *role, path, pose, leader, follow_dist, pred));
    }
    out
}
