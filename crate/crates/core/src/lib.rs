//! Multi-robot route planning with formation and overwatch incentives on
//! dynamic topological graphs.

// `!(x > 0.0)` checks are meant to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod dtg;
pub mod fixtures;
pub mod graphgen;
pub mod harness;
pub mod local_planner;
pub mod mid_level;
pub mod milp;
pub mod solver;
