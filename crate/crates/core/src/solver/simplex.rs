//! Dense dictionary simplex with bounded variables.
//!
//! Each row `r` of the model gets a slack `s_r` so that `A x + s = b`. The
//! dictionary stores `x_B = beta - alpha x_N` densely; `beta` is kept as the
//! last column so it transforms with every pivot like any other column.

use std::sync::Arc;

use crate::milp::{MilpModel, Sense};

pub const FEAS_TOL: f64 = 1e-7;
const OPT_TOL: f64 = 1e-8;
const PIV_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-13;
const BLAND_AFTER: usize = 1000;
const HARRIS_TOL: f64 = 1e-9;
const PERTURB: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// How a model variable maps onto internal columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ColMap {
    Direct(usize),
    /// `x = -y`, used when only the upper bound is finite.
    Neg(usize),
    /// `x = y1 - y2` for free variables.
    Split(usize, usize),
}

/// LP in internal form: every column has a finite lower bound.
#[derive(Debug, Clone)]
pub struct StdLp {
    pub n: usize,
    pub m: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
    pub sense: Vec<Sense>,
    pub cost: Vec<f64>,
    pub lo: Vec<f64>,
    pub up: Vec<f64>,
    pub map: Vec<ColMap>,
}

impl StdLp {
    pub fn from_model(model: &MilpModel) -> Self {
        let mut map = Vec::with_capacity(model.variables.len());
        let (mut lo, mut up) = (Vec::new(), Vec::new());
        for v in &model.variables {
            if v.lower.is_finite() {
                map.push(ColMap::Direct(lo.len()));
                lo.push(v.lower);
                up.push(v.upper);
            } else if v.upper.is_finite() {
                map.push(ColMap::Neg(lo.len()));
                lo.push(-v.upper);
                up.push(f64::INFINITY);
            } else {
                map.push(ColMap::Split(lo.len(), lo.len() + 1));
                lo.extend([0.0, 0.0]);
                up.extend([f64::INFINITY, f64::INFINITY]);
            }
        }
        let n = lo.len();
        let expand = |terms: &[(usize, f64)]| -> Vec<(usize, f64)> {
            let mut out = Vec::with_capacity(terms.len());
            for &(j, c) in terms {
                match map[j] {
                    ColMap::Direct(k) => out.push((k, c)),
                    ColMap::Neg(k) => out.push((k, -c)),
                    ColMap::Split(a, b) => out.extend([(a, c), (b, -c)]),
                }
            }
            out
        };
        let mut cost = vec![0.0; n];
        for (k, c) in expand(&model.objective) {
            cost[k] += c;
        }
        let rows: Vec<_> = model.constraints.iter().map(|c| expand(&c.terms)).collect();
        let mut lp = Self {
            n,
            m: rows.len(),
            rows,
            rhs: model.constraints.iter().map(|c| c.rhs).collect(),
            sense: model.constraints.iter().map(|c| c.sense).collect(),
            cost,
            lo,
            up,
            map,
        };
        lp.bound_open_columns();
        lp
    }

    /// Gives columns with no upper bound a loose finite one when the rows
    /// imply it, so more columns can start dual feasible. The feasible set is
    /// unchanged.
    fn bound_open_columns(&mut self) {
        if self.up.iter().all(|u| u.is_finite()) {
            return;
        }
        let prop = super::propagate::Propagator::new(self, &[]);
        let (mut lo, mut up) = (self.lo.clone(), self.up.clone());
        if !prop.run(&mut lo, &mut up, 10) {
            return;
        }
        for j in 0..self.n {
            if !self.up[j].is_finite() && up[j].is_finite() {
                self.up[j] = up[j] + 1.0 + 1e-3 * up[j].abs();
            }
        }
    }

    /// Internal column bounds implied by model bounds `[lo, up]` on variable `j`.
    pub fn internal_bounds(&self, j: usize, lo: f64, up: f64) -> Option<(usize, f64, f64)> {
        match self.map[j] {
            ColMap::Direct(k) => Some((k, lo, up)),
            ColMap::Neg(k) => Some((k, -up, -lo)),
            ColMap::Split(..) => None,
        }
    }

    pub fn model_values(&self, x: &[f64]) -> Vec<f64> {
        self.map
            .iter()
            .map(|m| match *m {
                ColMap::Direct(k) => x[k],
                ColMap::Neg(k) => -x[k],
                ColMap::Split(a, b) => x[a] - x[b],
            })
            .collect()
    }
}

pub(crate) fn slack_bounds(s: Sense) -> (f64, f64) {
    match s {
        Sense::Le => (0.0, f64::INFINITY),
        Sense::Ge => (f64::NEG_INFINITY, 0.0),
        Sense::Eq => (0.0, 0.0),
    }
}

/// Compact description of a basis, enough to rebuild a tableau.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub basic: Vec<usize>,
    pub at_up: Vec<bool>,
}

#[derive(Clone)]
pub struct Tableau {
    pub lp: Arc<StdLp>,
    m: usize,
    n: usize,
    w: usize,
    alpha: Vec<f64>,
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
    /// Position of each variable: `Ok(row)` if basic, `Err(col)` if nonbasic.
    pos: Vec<Result<usize, usize>>,
    pub x: Vec<f64>,
    pub lo: Vec<f64>,
    pub up: Vec<f64>,
    cost: Vec<f64>,
    d: Vec<f64>,
    at_up: Vec<bool>,
    pivots_since_clean: usize,
    pub iterations: usize,
    scratch: Vec<f64>,
    nz: Vec<usize>,
}

impl Tableau {
    /// Tableau with the all-slack basis and structurals at a finite bound.
    pub fn new(lp: Arc<StdLp>) -> Self {
        let (m, n) = (lp.m, lp.n);
        let w = n + 1;
        let mut alpha = vec![0.0; m * w];
        for (r, row) in lp.rows.iter().enumerate() {
            for &(j, c) in row {
                alpha[r * w + j] += c;
            }
            alpha[r * w + n] = lp.rhs[r];
        }
        let mut lo = lp.lo.clone();
        let mut up = lp.up.clone();
        for &s in &lp.sense {
            let (a, b) = slack_bounds(s);
            lo.push(a);
            up.push(b);
        }
        let mut cost = lp.cost.clone();
        cost.resize(n + m, 0.0);
        let mut t = Self {
            m,
            n,
            w,
            alpha,
            basic: (n..n + m).collect(),
            nonbasic: (0..n).collect(),
            pos: (0..n).map(Err).chain((0..m).map(Ok)).collect(),
            x: vec![0.0; n + m],
            lo,
            up,
            cost,
            d: vec![0.0; n],
            at_up: vec![false; n + m],
            pivots_since_clean: 0,
            iterations: 0,
            scratch: vec![0.0; w],
            nz: Vec::with_capacity(w),
            lp,
        };
        for j in 0..n {
            t.place_nonbasic(j, Some(t.cost[j] < 0.0));
        }
        t.recompute_basic();
        t.recompute_duals();
        t
    }

    /// Rebuilds a tableau for `basis` from the original rows.
    pub fn from_basis(lp: Arc<StdLp>, basis: &Basis, lo: &[f64], up: &[f64]) -> Self {
        let mut t = Self::new(lp);
        t.lo.copy_from_slice(lo);
        t.up.copy_from_slice(up);
        let want: Vec<usize> = basis.basic.iter().copied().filter(|&v| v < t.n).collect();
        let mut wanted = vec![false; t.n + t.m];
        for &v in &basis.basic {
            wanted[v] = true;
        }
        for v in want {
            let Err(col) = t.pos[v] else { continue };
            let mut best = None;
            let mut best_abs = 1e-7;
            for r in 0..t.m {
                let b = t.basic[r];
                if b >= t.n && !wanted[b] {
                    let a = t.alpha[r * t.w + col].abs();
                    if a > best_abs {
                        best_abs = a;
                        best = Some(r);
                    }
                }
            }
            if let Some(r) = best {
                t.pivot(r, col);
            }
        }
        for j in 0..t.n + t.m {
            if t.pos[j].is_err() {
                t.place_nonbasic(j, Some(basis.at_up[j]));
            }
        }
        t.recompute_basic();
        t.recompute_duals();
        t
    }

    pub fn basis(&self) -> Basis {
        Basis { basic: self.basic.clone(), at_up: self.at_up.clone() }
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn num_cols(&self) -> usize {
        self.n
    }

    pub fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    pub fn structural_values(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub fn is_basic(&self, v: usize) -> bool {
        self.pos[v].is_ok()
    }

    /// Reduced cost of a nonbasic variable.
    pub fn reduced_cost(&self, v: usize) -> Option<f64> {
        match self.pos[v] {
            Err(c) => Some(self.d[c]),
            Ok(_) => None,
        }
    }

    pub fn at_upper(&self, v: usize) -> bool {
        self.at_up[v]
    }

    /// Puts nonbasic `v` on a finite bound. `prefer_up` picks the side;
    /// `None` chooses the side favoured by the reduced cost when known.
    fn place_nonbasic(&mut self, v: usize, prefer_up: Option<bool>) {
        let (l, u) = (self.lo[v], self.up[v]);
        let want_up = match prefer_up {
            Some(b) => b,
            None => !l.is_finite(),
        };
        let (val, on_up) = if want_up && u.is_finite() {
            (u, true)
        } else if l.is_finite() {
            (l, false)
        } else if u.is_finite() {
            (u, true)
        } else {
            (0.0, false)
        };
        self.x[v] = val;
        self.at_up[v] = on_up;
    }

    /// Changes bounds of a variable, keeping nonbasic variables on a bound that
    /// preserves dual feasibility where possible.
    pub fn set_bounds(&mut self, v: usize, lo: f64, up: f64) {
        self.lo[v] = lo;
        self.up[v] = up;
        if let Err(col) = self.pos[v] {
            let old = self.x[v];
            let prefer_up = if self.d[col] < 0.0 {
                true
            } else if self.d[col] > 0.0 {
                false
            } else {
                self.at_up[v]
            };
            self.place_nonbasic(v, Some(prefer_up));
            let delta = self.x[v] - old;
            if delta != 0.0 {
                for r in 0..self.m {
                    let a = self.alpha[r * self.w + col];
                    if a != 0.0 {
                        let b = self.basic[r];
                        self.x[b] -= a * delta;
                    }
                }
            }
        }
    }

    fn recompute_basic(&mut self) {
        for r in 0..self.m {
            let row = &self.alpha[r * self.w..(r + 1) * self.w];
            let mut v = row[self.n];
            for (c, &j) in self.nonbasic.iter().enumerate() {
                let a = row[c];
                if a != 0.0 {
                    v -= a * self.x[j];
                }
            }
            self.x[self.basic[r]] = v;
        }
    }

    fn recompute_duals(&mut self) {
        for c in 0..self.n {
            self.d[c] = self.cost[self.nonbasic[c]];
        }
        for r in 0..self.m {
            let cb = self.cost[self.basic[r]];
            if cb != 0.0 {
                let row = &self.alpha[r * self.w..r * self.w + self.n];
                for (c, &a) in row.iter().enumerate() {
                    if a != 0.0 {
                        self.d[c] -= cb * a;
                    }
                }
            }
        }
    }

    /// Largest residual of `A x + s = b` on the original rows.
    pub fn residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (r, row) in self.lp.rows.iter().enumerate() {
            let act: f64 = row.iter().map(|&(j, c)| c * self.x[j]).sum::<f64>() + self.x[self.n + r];
            worst = worst.max((act - self.lp.rhs[r]).abs() / (1.0 + self.lp.rhs[r].abs()));
        }
        worst
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let w = self.w;
        let inv = 1.0 / self.alpha[r * w + col];
        self.nz.clear();
        for j in 0..w {
            let v = &mut self.alpha[r * w + j];
            if j == col {
                *v = inv;
            } else {
                *v *= inv;
                if v.abs() < DROP_TOL {
                    *v = 0.0;
                }
            }
            self.scratch[j] = *v;
            if j != col && *v != 0.0 {
                self.nz.push(j);
            }
        }
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let base = i * w;
            let f = self.alpha[base + col];
            if f == 0.0 {
                continue;
            }
            for &j in &self.nz {
                let v = &mut self.alpha[base + j];
                *v -= f * self.scratch[j];
                if v.abs() < DROP_TOL {
                    *v = 0.0;
                }
            }
            self.alpha[base + col] = -f * inv;
        }
        let f = self.d[col];
        if f != 0.0 {
            for &j in &self.nz {
                if j < self.n {
                    self.d[j] -= f * self.scratch[j];
                }
            }
            self.d[col] = -f * inv;
        }
        let entering = self.nonbasic[col];
        let leaving = self.basic[r];
        self.basic[r] = entering;
        self.nonbasic[col] = leaving;
        self.pos[entering] = Ok(r);
        self.pos[leaving] = Err(col);
        self.pivots_since_clean += 1;
        self.iterations += 1;
    }

    fn infeasibility(&self, v: usize) -> f64 {
        let x = self.x[v];
        if x < self.lo[v] - FEAS_TOL {
            self.lo[v] - x
        } else if x > self.up[v] + FEAS_TOL {
            x - self.up[v]
        } else {
            0.0
        }
    }

    fn primal_infeasible(&self) -> bool {
        self.basic.iter().any(|&b| self.infeasibility(b) > 0.0)
    }

    fn dual_infeasible_cols(&self) -> bool {
        (0..self.n).any(|c| self.entering_dir(c, self.d[c]).is_some())
    }

    /// Direction in which nonbasic column `c` improves the objective under
    /// reduced cost `dc`, if any.
    fn entering_dir(&self, c: usize, dc: f64) -> Option<f64> {
        let v = self.nonbasic[c];
        if self.lo[v] == self.up[v] {
            return None;
        }
        if self.at_up[v] {
            (dc > OPT_TOL).then_some(-1.0)
        } else {
            (dc < -OPT_TOL).then_some(1.0)
        }
    }

    fn iteration_cap(&self) -> usize {
        50 * (self.m + self.n) + 20_000
    }

    /// Primal simplex with a composite phase 1.
    pub fn primal(&mut self) -> Outcome {
        let cap = self.iterations + self.iteration_cap();
        let mut degenerate = 0usize;
        let mut d1 = vec![0.0; self.n];
        loop {
            if self.iterations >= cap {
                return Outcome::IterationLimit;
            }
            if self.pivots_since_clean > 200 {
                self.clean();
            }
            let phase1 = self.primal_infeasible();
            if phase1 {
                d1.iter_mut().for_each(|v| *v = 0.0);
                for r in 0..self.m {
                    let b = self.basic[r];
                    let c1 = if self.x[b] < self.lo[b] - FEAS_TOL {
                        -1.0
                    } else if self.x[b] > self.up[b] + FEAS_TOL {
                        1.0
                    } else {
                        continue;
                    };
                    let row = &self.alpha[r * self.w..r * self.w + self.n];
                    for (c, &a) in row.iter().enumerate() {
                        if a != 0.0 {
                            d1[c] -= c1 * a;
                        }
                    }
                }
            }
            let bland = degenerate > BLAND_AFTER;
            let dvec: &[f64] = if phase1 { &d1 } else { &self.d };
            let mut enter: Option<(usize, f64)> = None;
            let mut best = 0.0;
            let mut best_var = usize::MAX;
            for c in 0..self.n {
                if let Some(dir) = self.entering_dir(c, dvec[c]) {
                    let score = dvec[c].abs();
                    let var = self.nonbasic[c];
                    if bland {
                        if var < best_var {
                            best_var = var;
                            enter = Some((c, dir));
                        }
                    } else if score > best {
                        best = score;
                        enter = Some((c, dir));
                    }
                }
            }
            let Some((col, dir)) = enter else {
                if phase1 {
                    return Outcome::Infeasible;
                }
                if self.clean_and_recheck() {
                    return Outcome::Optimal;
                }
                continue;
            };

            let ev = self.nonbasic[col];
            let mut theta = self.up[ev] - self.lo[ev];
            // (row, exact limit, limit with tolerance, target, |pivot|)
            let mut cands: Vec<(usize, f64, f64, f64, f64)> = Vec::new();
            for r in 0..self.m {
                let a = self.alpha[r * self.w + col];
                if a.abs() < PIV_TOL {
                    continue;
                }
                let b = self.basic[r];
                let rate = -a * dir;
                let (xb, l, u) = (self.x[b], self.lo[b], self.up[b]);
                let (lim, slack, target) = if phase1 && xb < l - FEAS_TOL {
                    if rate > 0.0 {
                        ((l - xb) / rate, 0.0, l)
                    } else {
                        continue;
                    }
                } else if phase1 && xb > u + FEAS_TOL {
                    if rate < 0.0 {
                        ((xb - u) / -rate, 0.0, u)
                    } else {
                        continue;
                    }
                } else if rate < 0.0 {
                    if !l.is_finite() {
                        continue;
                    }
                    (((xb - l) / -rate).max(0.0), FEAS_TOL / -rate, l)
                } else {
                    if !u.is_finite() {
                        continue;
                    }
                    (((u - xb) / rate).max(0.0), FEAS_TOL / rate, u)
                };
                cands.push((r, lim, lim + slack, target, a.abs()));
            }
            let bound = cands.iter().map(|c| c.2).fold(theta, f64::min);
            let mut leave: Option<(usize, f64)> = None;
            let mut leave_abs = 0.0;
            for &(r, lim, _, target, abs) in &cands {
                if lim > bound {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((lr, _)) => {
                        if bland {
                            self.basic[r] < self.basic[lr]
                        } else {
                            abs > leave_abs
                        }
                    }
                };
                if better {
                    leave = Some((r, target));
                    leave_abs = abs;
                    theta = lim;
                }
            }
            if !theta.is_finite() {
                return Outcome::Unbounded;
            }
            if theta < 1e-11 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            let step = dir * theta;
            self.x[ev] += step;
            for r in 0..self.m {
                let a = self.alpha[r * self.w + col];
                if a != 0.0 {
                    let b = self.basic[r];
                    self.x[b] -= a * step;
                }
            }
            match leave {
                None => {
                    self.at_up[ev] = dir > 0.0;
                    self.x[ev] = if dir > 0.0 { self.up[ev] } else { self.lo[ev] };
                    self.iterations += 1;
                }
                Some((r, target)) => {
                    let lv = self.basic[r];
                    self.pivot(r, col);
                    self.x[lv] = target;
                    self.at_up[lv] = target == self.up[lv] && target != self.lo[lv];
                }
            }
        }
    }

    /// Dual simplex from a dual feasible basis. Falls back to the primal
    /// method if dual feasibility is lost.
    pub fn dual(&mut self) -> Outcome {
        let cap = self.iterations + self.iteration_cap();
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= cap {
                return Outcome::IterationLimit;
            }
            if self.pivots_since_clean > 200 {
                self.clean();
            }
            let bland = degenerate > BLAND_AFTER;
            let mut leave: Option<usize> = None;
            let mut worst = 0.0;
            for r in 0..self.m {
                let b = self.basic[r];
                let inf = self.infeasibility(b);
                if inf > 0.0 {
                    if bland {
                        if leave.is_none_or(|lr| b < self.basic[lr]) {
                            leave = Some(r);
                        }
                    } else if inf > worst {
                        worst = inf;
                        leave = Some(r);
                    }
                }
            }
            let Some(r) = leave else {
                if self.clean_and_recheck() {
                    return Outcome::Optimal;
                }
                if self.dual_infeasible_cols() {
                    return self.primal();
                }
                continue;
            };
            let b = self.basic[r];
            let below = self.x[b] < self.lo[b];
            let target = if below { self.lo[b] } else { self.up[b] };
            // x_b must move by sign s
            let s = if below { 1.0 } else { -1.0 };
            let row = r * self.w;
            // Harris ratio test: bound the step with a small dual tolerance,
            // then take the largest pivot among columns within that bound.
            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            let mut bound = f64::INFINITY;
            for c in 0..self.n {
                let a = self.alpha[row + c];
                if a.abs() < PIV_TOL {
                    continue;
                }
                let v = self.nonbasic[c];
                if self.lo[v] == self.up[v] {
                    continue;
                }
                let sigma = if self.at_up[v] { -1.0 } else { 1.0 };
                if -a * sigma * s <= 0.0 {
                    continue;
                }
                let dj = (self.d[c] * sigma).max(0.0);
                bound = bound.min((dj + HARRIS_TOL) / a.abs());
                cands.push((c, dj / a.abs(), a.abs()));
            }
            let mut enter: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            let mut best_abs = 0.0;
            for &(c, ratio, abs) in &cands {
                if ratio > bound {
                    continue;
                }
                let better = match enter {
                    None => true,
                    Some(ec) => {
                        if bland {
                            self.nonbasic[c] < self.nonbasic[ec]
                        } else {
                            abs > best_abs
                        }
                    }
                };
                if better {
                    best_ratio = ratio;
                    best_abs = abs;
                    enter = Some(c);
                }
            }
            let Some(col) = enter else {
                return Outcome::Infeasible;
            };
            if best_ratio < 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            let a = self.alpha[row + col];
            let delta = (self.x[b] - target) / a;
            let ev = self.nonbasic[col];
            self.x[ev] += delta;
            for i in 0..self.m {
                let ai = self.alpha[i * self.w + col];
                if ai != 0.0 {
                    let bi = self.basic[i];
                    self.x[bi] -= ai * delta;
                }
            }
            self.pivot(r, col);
            self.x[b] = target;
            self.at_up[b] = !below && target != self.lo[b];
        }
    }

    /// Chooses the cheaper method for the current state and solves.
    pub fn solve(&mut self) -> Outcome {
        if self.dual_infeasible_cols() {
            return self.primal();
        }
        // Many zero reduced costs stall the dual method, so it runs on
        // slightly perturbed costs and the primal method cleans up after.
        let original = self.perturb_costs();
        let out = self.dual();
        self.cost = original;
        self.recompute_duals();
        match out {
            Outcome::Optimal => self.primal(),
            other => other,
        }
    }

    /// Shifts nonbasic structural costs away from zero in the direction that
    /// keeps them dual feasible. Returns the unperturbed costs.
    fn perturb_costs(&mut self) -> Vec<f64> {
        let original = self.cost.clone();
        let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
        for c in 0..self.n {
            h = h.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let u = 0.5 + 0.5 * ((h >> 11) as f64 / (1u64 << 53) as f64);
            let v = self.nonbasic[c];
            if self.lo[v] == self.up[v] {
                continue;
            }
            let eps = PERTURB * (1.0 + self.cost[v].abs()) * u;
            self.cost[v] += if self.at_up[v] { -eps } else { eps };
        }
        self.recompute_duals();
        original
    }

    fn clean(&mut self) {
        self.recompute_basic();
        self.recompute_duals();
        self.pivots_since_clean = 0;
    }

    /// Refreshes values from the dictionary and, if the dictionary itself
    /// has drifted from the original rows, rebuilds it. Returns true when the
    /// basis is still primal and dual feasible afterwards.
    fn clean_and_recheck(&mut self) -> bool {
        self.clean();
        if self.residual() > 1e-8 {
            let basis = self.basis();
            let (lo, up) = (self.lo.clone(), self.up.clone());
            let iters = self.iterations;
            *self = Self::from_basis(self.lp.clone(), &basis, &lo, &up);
            self.iterations = iters;
        }
        !self.primal_infeasible() && !self.dual_infeasible_cols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawLp {
    pub outcome: Outcome,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Solves the continuous relaxation of `model`.
pub fn solve_relaxation(model: &MilpModel) -> RawLp {
    let lp = Arc::new(StdLp::from_model(model));
    let mut t = Tableau::new(lp.clone());
    let outcome = t.solve();
    let x = lp.model_values(t.structural_values());
    RawLp { outcome, objective: model.objective_value(&x), x, iterations: t.iterations }
}
