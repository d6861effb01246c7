//! LP and MILP solving, the exhaustive oracle, and LP-file exchange.

pub mod bnb;
pub mod brute;
pub mod lpfile;
pub mod propagate;
pub mod simplex;

use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use bnb::{Budget, MilpStatus};
pub use brute::{brute_force_solve, BruteForceError};
pub use lpfile::{export_lp, format_solution, import_solution, import_values, ImportError};

use crate::milp::{decode_solution, MilpModel, OccupancySolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
}

/// Solves the continuous relaxation of `model`; integrality markers are ignored.
pub fn solve_lp(model: &MilpModel) -> LpSolution {
    let raw = simplex::solve_relaxation(model);
    let status = match raw.outcome {
        simplex::Outcome::Optimal => LpStatus::Optimal,
        simplex::Outcome::Infeasible => LpStatus::Infeasible,
        simplex::Outcome::Unbounded => LpStatus::Unbounded,
        simplex::Outcome::IterationLimit => LpStatus::IterationLimit,
    };
    LpSolution { status, values: raw.x, objective: raw.objective }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnBReport {
    pub status: MilpStatus,
    /// Decoded plan for occupancy models.
    pub incumbent: Option<OccupancySolution>,
    /// Raw incumbent values in model variable order.
    pub values: Option<Vec<f64>>,
    pub objective: f64,
    pub bound: f64,
    pub nodes_explored: u64,
    pub lp_iterations: usize,
    pub wall_time: Duration,
}

impl BnBReport {
    pub fn gap(&self) -> f64 {
        self.objective - self.bound
    }
}

/// Branch and bound to proven optimality within `budget`.
pub fn solve_milp(model: &MilpModel, budget: Budget) -> BnBReport {
    let r = bnb::branch_and_bound(model, budget);
    let incumbent = match (&r.x, &model.layout) {
        (Some(x), Some(_)) => decode_solution(model, x).ok(),
        _ => None,
    };
    BnBReport {
        status: r.status,
        incumbent,
        values: r.x,
        objective: r.objective,
        bound: r.bound,
        nodes_explored: r.nodes,
        lp_iterations: r.lp_iterations,
        wall_time: r.wall_time,
    }
}
