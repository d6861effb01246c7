//! Depth-first branch and bound over the simplex relaxation.

use std::sync::Arc;
use std::time::Duration;

use super::propagate::Propagator;
use super::simplex::{Basis, Outcome, StdLp, Tableau};
use crate::milp::{MilpModel, VarKind};

pub const INT_TOL: f64 = 1e-6;
pub const GAP_TOL: f64 = 1e-6;

/// Memory allowed for tableau copies kept by pending nodes; nodes beyond it
/// keep only a basis and are refactored when visited.
const TABLEAU_MEMORY: usize = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub time: Duration,
    pub max_nodes: u64,
}

impl Budget {
    pub fn seconds(s: f64) -> Self {
        Self { time: Duration::from_secs_f64(s), max_nodes: u64::MAX }
    }

    pub fn nodes(n: u64) -> Self {
        Self { time: Duration::MAX, max_nodes: n }
    }
}

impl Default for Budget {
    fn default() -> Self {
        Self::seconds(60.0)
    }
}

/// Wall clock that degrades to "no time elapsed" where `Instant` is unavailable.
pub struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    pub fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    pub fn elapsed(&self) -> Duration {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed()
        }
        #[cfg(target_arch = "wasm32")]
        {
            Duration::ZERO
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MilpStatus {
    Optimal,
    FeasibleBudgetHit,
    BudgetHitNoIncumbent,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpResult {
    pub status: MilpStatus,
    pub x: Option<Vec<f64>>,
    pub objective: f64,
    pub bound: f64,
    pub nodes: u64,
    pub lp_iterations: usize,
    pub wall_time: Duration,
}

struct IntVar {
    col: usize,
    model_var: usize,
    /// Internal column is the negated model variable.
    negated: bool,
    priority: u8,
}

enum Start {
    Tableau(Box<Tableau>),
    Basis(Basis),
}

struct Node {
    lo: Vec<f64>,
    up: Vec<f64>,
    start: Start,
    depth: u32,
    bound: f64,
}

/// Tightens integer bounds that cannot change without the LP bound passing
/// the incumbent.
fn reduced_cost_fixing(tab: &Tableau, int_cols: &[usize], obj: f64, incumbent: f64, lo: &mut [f64], up: &mut [f64]) {
    let slack = incumbent - obj;
    for &k in int_cols {
        let Some(d) = tab.reduced_cost(k) else { continue };
        if lo[k] == up[k] {
            continue;
        }
        if !tab.at_upper(k) && d > 1e-9 {
            let room = (slack / d + 1e-9).floor();
            if lo[k] + room < up[k] {
                up[k] = lo[k] + room;
            }
        } else if tab.at_upper(k) && d < -1e-9 {
            let room = (slack / -d + 1e-9).floor();
            if up[k] - room > lo[k] {
                lo[k] = up[k] - room;
            }
        }
    }
}

fn fractionality(v: f64) -> f64 {
    (v - v.floor()).min(v.ceil() - v)
}

/// Minimises `model` with integrality enforced on integer and binary variables.
pub fn branch_and_bound(model: &MilpModel, budget: Budget) -> MilpResult {
    let clock = Stopwatch::start();
    let lp = Arc::new(StdLp::from_model(model));
    let mut ints = Vec::new();
    for (j, v) in model.variables.iter().enumerate() {
        if v.kind == VarKind::Continuous {
            continue;
        }
        let (col, negated) = match lp.map[j] {
            super::simplex::ColMap::Direct(k) => (k, false),
            super::simplex::ColMap::Neg(k) => (k, true),
            super::simplex::ColMap::Split(..) => panic!("integer variable {} must have a finite bound", v.name),
        };
        ints.push(IntVar { col, model_var: j, negated, priority: v.role.branch_priority() });
    }
    // integer columns get integral bounds
    let mut root_lo = lp.lo.clone();
    let mut root_up = lp.up.clone();
    for iv in &ints {
        root_lo[iv.col] = root_lo[iv.col].ceil();
        root_up[iv.col] = root_up[iv.col].floor();
    }

    let mut result = MilpResult {
        status: MilpStatus::Infeasible,
        x: None,
        objective: f64::INFINITY,
        bound: f64::NEG_INFINITY,
        nodes: 0,
        lp_iterations: 0,
        wall_time: Duration::ZERO,
    };
    let int_cols: Vec<usize> = ints.iter().map(|iv| iv.col).collect();
    let prop = Propagator::new(&lp, &int_cols);
    let mut is_int = vec![false; lp.n];
    for &c in &int_cols {
        is_int[c] = true;
    }
    let max_stored = (TABLEAU_MEMORY / (8 * (lp.m.max(1)) * (lp.n + 1))).max(16);
    let root_tab = Tableau::new(lp.clone());
    let mut pending: Vec<Node> = Vec::new();
    let mut current = Some(Node {
        lo: root_lo,
        up: root_up,
        start: Start::Tableau(Box::new(root_tab)),
        depth: 0,
        bound: f64::NEG_INFINITY,
    });
    let mut stored = 1usize;
    let mut root_bound = f64::NEG_INFINITY;
    let mut trouble = false;
    let mut unbounded = false;

    let prune_level = |inc: f64| if inc.is_finite() { inc - GAP_TOL * inc.abs().max(1.0) } else { f64::INFINITY };

    loop {
        let node = match current.take() {
            Some(n) => n,
            None => {
                // deepest first, then best bound
                let Some(i) = (0..pending.len()).max_by(|&a, &b| {
                    let (na, nb) = (&pending[a], &pending[b]);
                    na.depth.cmp(&nb.depth).then(nb.bound.total_cmp(&na.bound))
                }) else {
                    break;
                };
                pending.swap_remove(i)
            }
        };
        if node.bound >= prune_level(result.objective) {
            if matches!(node.start, Start::Tableau(_)) {
                stored -= 1;
            }
            continue;
        }
        if result.nodes >= budget.max_nodes || clock.elapsed() > budget.time {
            pending.push(node);
            break;
        }
        result.nodes += 1;
        let mut node = node;
        if !prop.run(&mut node.lo, &mut node.up, 20) {
            if matches!(node.start, Start::Tableau(_)) {
                stored -= 1;
            }
            continue;
        }

        let mut tab = match node.start {
            Start::Tableau(t) => {
                stored -= 1;
                let mut t = *t;
                for &k in &int_cols {
                    if t.lo[k] != node.lo[k] || t.up[k] != node.up[k] {
                        t.set_bounds(k, node.lo[k], node.up[k]);
                    }
                }
                t
            }
            Start::Basis(b) => {
                let mut lo = lp.lo.clone();
                let mut up = lp.up.clone();
                for &k in &int_cols {
                    lo[k] = node.lo[k];
                    up[k] = node.up[k];
                }
                for &s in &lp.sense {
                    let (a, b) = super::simplex::slack_bounds(s);
                    lo.push(a);
                    up.push(b);
                }
                Tableau::from_basis(lp.clone(), &b, &lo, &up)
            }
        };
        let before = tab.iterations;
        let outcome = tab.solve();
        result.lp_iterations += tab.iterations - before;
        match outcome {
            Outcome::Optimal => {}
            Outcome::Infeasible => continue,
            Outcome::Unbounded => {
                unbounded = true;
                break;
            }
            Outcome::IterationLimit => {
                trouble = true;
                continue;
            }
        }
        let obj = tab.objective();
        if node.depth == 0 {
            root_bound = obj;
        }
        if obj >= prune_level(result.objective) {
            continue;
        }
        let x = lp.model_values(tab.structural_values());
        if result.objective.is_finite() {
            reduced_cost_fixing(&tab, &int_cols, obj, result.objective, &mut node.lo, &mut node.up);
        }

        let mut pick: Option<(usize, f64)> = None;
        let mut pick_key = (0u8, 0.0f64);
        for (i, iv) in ints.iter().enumerate() {
            let v = x[iv.model_var];
            let f = fractionality(v);
            if f > INT_TOL {
                let key = (iv.priority, f);
                if pick.is_none() || key.0 > pick_key.0 || (key.0 == pick_key.0 && key.1 > pick_key.1 + 1e-12) {
                    pick = Some((i, v));
                    pick_key = key;
                }
            }
        }
        let Some((i, v)) = pick else {
            let mut xr = x;
            for iv in &ints {
                xr[iv.model_var] = xr[iv.model_var].round();
            }
            let o = model.objective_value(&xr);
            if o < result.objective {
                result.objective = o;
                result.x = Some(xr);
            }
            continue;
        };

        let iv = &ints[i];
        // children in internal column space
        let (floor_v, ceil_v) = (v.floor(), v.ceil());
        let mut down = (node.lo.clone(), node.up.clone());
        let mut upc = (node.lo.clone(), node.up.clone());
        if iv.negated {
            // x <= floor  <=>  y >= -floor ; x >= ceil <=> y <= -ceil
            down.0[iv.col] = -floor_v;
            upc.1[iv.col] = -ceil_v;
        } else {
            down.1[iv.col] = floor_v;
            upc.0[iv.col] = ceil_v;
        }
        let prefer_up = v - floor_v >= 0.5;
        let (first, second) = if prefer_up { (upc, down) } else { (down, upc) };
        let second_start = if stored < max_stored {
            stored += 1;
            Start::Tableau(Box::new(tab.clone()))
        } else {
            Start::Basis(tab.basis())
        };
        pending.push(Node { lo: second.0, up: second.1, start: second_start, depth: node.depth + 1, bound: obj });
        stored += 1;
        current = Some(Node {
            lo: first.0,
            up: first.1,
            start: Start::Tableau(Box::new(tab)),
            depth: node.depth + 1,
            bound: obj,
        });
    }

    result.wall_time = clock.elapsed();
    if unbounded {
        result.status = MilpStatus::Unbounded;
        result.bound = f64::NEG_INFINITY;
        return result;
    }
    let open_bound = pending
        .iter()
        .filter(|n| n.bound < prune_level(result.objective))
        .map(|n| n.bound)
        .fold(f64::INFINITY, f64::min);
    let open = open_bound.is_finite() || pending.iter().any(|n| n.bound == f64::NEG_INFINITY);
    if !open && !trouble {
        result.bound = result.objective;
        result.status = if result.x.is_some() { MilpStatus::Optimal } else { MilpStatus::Infeasible };
    } else {
        result.bound = if open { open_bound.max(root_bound).min(result.objective) } else { root_bound };
        result.status =
            if result.x.is_some() { MilpStatus::FeasibleBudgetHit } else { MilpStatus::BudgetHitNoIncumbent };
    }
    result
}
