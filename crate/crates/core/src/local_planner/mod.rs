//! Differential-drive kinematics, stage costs and MPPI for edge execution.

pub mod mppi;
pub mod sim;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::graphgen::raster::Grid;
use crate::mid_level::ArcPath;

pub use mppi::{mppi_plan, rollout, MppiParams};
pub use sim::{simulate_team, SimEvent, SimLog, SimParams, StepRecord};

/// Cost returned for lethal entries and trajectory collisions.
pub const HUGE_COST: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub p: [f64; 2],
    pub theta: f64,
    /// Wheel velocities from the previous step (rad/s).
    pub w: [f64; 2],
}

impl RobotState {
    pub fn at(p: [f64; 2], theta: f64) -> Self {
        Self { p, theta: wrap_angle(theta), w: [0.0, 0.0] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicParams {
    pub wheel_radius: f64,
    pub wheel_base: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub dt: f64,
}

impl Default for KinematicParams {
    fn default() -> Self {
        Self { wheel_radius: 0.1, wheel_base: 0.5, v_min: -0.5, v_max: 2.0, a_max: 2.0, dt: 0.1 }
    }
}

impl KinematicParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.wheel_radius > 0.0 && self.wheel_base > 0.0 && self.dt > 0.0) {
            return Err("wheel radius, wheel base and dt must be positive".into());
        }
        if !(self.v_min <= self.v_max) || !(self.a_max >= 0.0) {
            return Err("need v_min <= v_max and a_max >= 0".into());
        }
        Ok(())
    }
}

/// Wraps to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = a % (2.0 * PI);
    if x <= -PI {
        x += 2.0 * PI;
    } else if x > PI {
        x -= 2.0 * PI;
    }
    x
}

/// One step of the bounded unicycle model with control `u = [v, alpha]`.
pub fn dubins_step(x: &RobotState, u: [f64; 2], k: &KinematicParams) -> RobotState {
    let (r, b) = (k.wheel_radius, k.wheel_base);
    let w = [u[0] / r + b * u[1] / (2.0 * r), u[0] / r - b * u[1] / (2.0 * r)];
    let dw = k.a_max / r * k.dt;
    let mut wc = [0.0; 2];
    for i in 0..2 {
        let hi = w[i].max(k.v_min / r).max(x.w[i] - dw);
        wc[i] = hi.min(k.v_max / r).min(x.w[i] + dw);
    }
    let v = r / 2.0 * (wc[0] + wc[1]);
    let omega = r / b * (wc[0] - wc[1]);
    RobotState {
        p: [x.p[0] + x.theta.cos() * v * k.dt, x.p[1] + x.theta.sin() * v * k.dt],
        theta: wrap_angle(x.theta + omega * k.dt),
        w: wc,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageWeights {
    pub goal_dist: f64,
    pub goal_heading: f64,
    pub pointing: f64,
    pub path_dist: f64,
    pub path_heading: f64,
    pub costmap: f64,
    pub collision: f64,
}

impl StageWeights {
    pub fn ones() -> Self {
        Self {
            goal_dist: 1.0,
            goal_heading: 1.0,
            pointing: 1.0,
            path_dist: 1.0,
            path_heading: 1.0,
            costmap: 1.0,
            collision: 1.0,
        }
    }
}

impl Default for StageWeights {
    fn default() -> Self {
        // the goal-heading term grows like exp(d^2 / 4) with distance to the
        // goal, so it stays off unless configured
        Self { goal_heading: 0.0, path_dist: 5.0, ..Self::ones() }
    }
}

/// Local cost map with values 0..=255; cells outside the grid read 255.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMap {
    pub grid: Grid<u8>,
}

impl CostMap {
    pub fn value_at(&self, p: [f64; 2]) -> f64 {
        match self.grid.geom.locate(p) {
            Some(c) => *self.grid.get(c) as f64,
            None => 255.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageContext {
    /// Goal position and heading.
    pub goal: [f64; 3],
    pub path: ArcPath,
    pub costmap: Option<CostMap>,
    pub lethal: f64,
    pub lethal_penalty: f64,
    pub pointing_radius: f64,
    pub path_scale: f64,
    pub collision_radius: f64,
    /// Planned positions of the other coalition members, indexed like the
    /// rollout; the last point is held once a trajectory runs out.
    pub neighbors: Vec<Vec<[f64; 2]>>,
    pub weights: StageWeights,
}

impl StageContext {
    /// Context with free terrain, no neighbours and unit weights.
    pub fn simple(goal: [f64; 3], path: ArcPath) -> Self {
        Self {
            goal,
            path,
            costmap: None,
            lethal: 200.0,
            lethal_penalty: 1000.0,
            pointing_radius: 1.0,
            path_scale: 2.0,
            collision_radius: 0.75,
            neighbors: Vec::new(),
            weights: StageWeights::ones(),
        }
    }

    fn cell(&self, p: [f64; 2]) -> f64 {
        self.costmap.as_ref().map_or(0.0, |m| m.value_at(p))
    }
}

/// Unweighted components in the order goal distance, goal heading, pointing,
/// path distance, path heading, cost map, collision. `t` is the rollout index
/// of `x`, used to pick the neighbours' positions.
pub fn stage_terms(x: &RobotState, prev: &RobotState, ctx: &StageContext, t: usize, terminal: bool) -> [f64; 7] {
    let dpd = [ctx.goal[0] - x.p[0], ctx.goal[1] - x.p[1]];
    let dist_d = dpd[0].hypot(dpd[1]);
    let theta_d = ctx.goal[2];
    let (cd, sd) = (theta_d.cos(), theta_d.sin());

    let g_delta = dist_d;
    let along = dpd[0] / 2.0 * cd + dpd[1] / 2.0 * sd;
    let g_h = (along * along).exp() * (-wrap_angle(theta_d - x.theta).cos()).min(0.9);
    let g_p = if dist_d < ctx.pointing_radius && dist_d > 0.0 {
        (-(dpd[1].atan2(dpd[0]) - theta_d).cos()).max(0.0)
    } else {
        0.0
    };

    let (s, q) = ctx.path.project(x.p);
    let dm = (q[0] - x.p[0]).hypot(q[1] - x.p[1]);
    let g_md = (dm / ctx.path_scale).min(1.0).powi(2);
    let dp = [x.p[0] - prev.p[0], x.p[1] - prev.p[1]];
    let step = dp[0].hypot(dp[1]);
    let g_mh = if step > 0.0 {
        let tm = ctx.path.heading_at(s);
        1.0 - (dp[0] * tm.cos() + dp[1] * tm.sin()) / step
    } else {
        0.0
    };

    let (c_now, c_prev) = (ctx.cell(x.p), ctx.cell(prev.p));
    let g_c = if c_now >= ctx.lethal && (c_prev < ctx.lethal || terminal) {
        HUGE_COST
    } else if c_now >= ctx.lethal {
        ctx.lethal_penalty
    } else {
        c_now / ctx.lethal
    };

    let r2 = ctx.collision_radius * ctx.collision_radius;
    let hit = ctx
        .neighbors
        .iter()
        .filter_map(|traj| traj.get(t).or(traj.last()))
        .any(|q| (q[0] - x.p[0]).powi(2) + (q[1] - x.p[1]).powi(2) < r2);
    let g_tc = if hit { HUGE_COST } else { 0.0 };

    [g_delta, g_h, g_p, g_md, g_mh, g_c, g_tc]
}

/// Weighted sum of [`stage_terms`].
pub fn stage_cost(x: &RobotState, prev: &RobotState, ctx: &StageContext, t: usize, terminal: bool) -> f64 {
    let t = stage_terms(x, prev, ctx, t, terminal);
    let w = &ctx.weights;
    w.goal_dist * t[0]
        + w.goal_heading * t[1]
        + w.pointing * t[2]
        + w.path_dist * t[3]
        + w.path_heading * t[4]
        + w.costmap * t[5]
        + w.collision * t[6]
}
