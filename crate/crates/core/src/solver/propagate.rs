//! Bound tightening from row activity limits.

use super::simplex::StdLp;
use crate::milp::Sense;

const ROUND_TOL: f64 = 1e-6;

pub struct Propagator {
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    sense: Vec<Sense>,
    is_int: Vec<bool>,
    /// Rows touching each column.
    col_rows: Vec<Vec<usize>>,
}

#[derive(Clone, Copy)]
struct Activity {
    finite: f64,
    infinite: usize,
}

impl Activity {
    fn without(&self, contrib: f64) -> Option<f64> {
        if contrib.is_finite() {
            (self.infinite == 0).then_some(self.finite - contrib)
        } else {
            (self.infinite == 1).then_some(self.finite)
        }
    }
}

impl Propagator {
    pub fn new(lp: &StdLp, int_cols: &[usize]) -> Self {
        let mut is_int = vec![false; lp.n];
        for &c in int_cols {
            is_int[c] = true;
        }
        let mut col_rows = vec![Vec::new(); lp.n];
        for (r, row) in lp.rows.iter().enumerate() {
            for &(j, _) in row {
                col_rows[j].push(r);
            }
        }
        Self { rows: lp.rows.clone(), rhs: lp.rhs.clone(), sense: lp.sense.clone(), is_int, col_rows }
    }

    fn min_activity(&self, r: usize, lo: &[f64], up: &[f64]) -> Activity {
        let mut a = Activity { finite: 0.0, infinite: 0 };
        for &(j, c) in &self.rows[r] {
            let v = if c > 0.0 { c * lo[j] } else { c * up[j] };
            if v.is_finite() {
                a.finite += v;
            } else {
                a.infinite += 1;
            }
        }
        a
    }

    fn max_activity(&self, r: usize, lo: &[f64], up: &[f64]) -> Activity {
        let mut a = Activity { finite: 0.0, infinite: 0 };
        for &(j, c) in &self.rows[r] {
            let v = if c > 0.0 { c * up[j] } else { c * lo[j] };
            if v.is_finite() {
                a.finite += v;
            } else {
                a.infinite += 1;
            }
        }
        a
    }

    /// Tightens `lo`/`up` in place. Returns false when some row cannot be
    /// satisfied within the bounds.
    pub fn run(&self, lo: &mut [f64], up: &mut [f64], max_passes: usize) -> bool {
        let m = self.rows.len();
        let mut queued = vec![true; m];
        let mut queue: Vec<usize> = (0..m).collect();
        let mut passes = 0;
        while !queue.is_empty() && passes < max_passes {
            passes += 1;
            let current = std::mem::take(&mut queue);
            for &r in &current {
                queued[r] = false;
            }
            for r in current {
                let b = self.rhs[r];
                let check_le = matches!(self.sense[r], Sense::Le | Sense::Eq);
                let check_ge = matches!(self.sense[r], Sense::Ge | Sense::Eq);
                let scale = 1e-7 * (1.0 + b.abs());
                let mut changed: Vec<usize> = Vec::new();
                if check_le {
                    let act = self.min_activity(r, lo, up);
                    if act.infinite == 0 && act.finite > b + scale {
                        return false;
                    }
                    for &(j, c) in &self.rows[r] {
                        let contrib = if c > 0.0 { c * lo[j] } else { c * up[j] };
                        let Some(rest) = act.without(contrib) else { continue };
                        let bound = (b - rest) / c;
                        if c > 0.0 {
                            if self.tighten_up(j, bound, lo, up) {
                                changed.push(j);
                            }
                        } else if self.tighten_lo(j, bound, lo, up) {
                            changed.push(j);
                        }
                    }
                }
                if check_ge {
                    let act = self.max_activity(r, lo, up);
                    if act.infinite == 0 && act.finite < b - scale {
                        return false;
                    }
                    for &(j, c) in &self.rows[r] {
                        let contrib = if c > 0.0 { c * up[j] } else { c * lo[j] };
                        let Some(rest) = act.without(contrib) else { continue };
                        let bound = (b - rest) / c;
                        if c > 0.0 {
                            if self.tighten_lo(j, bound, lo, up) {
                                changed.push(j);
                            }
                        } else if self.tighten_up(j, bound, lo, up) {
                            changed.push(j);
                        }
                    }
                }
                for j in changed {
                    if lo[j] > up[j] + 1e-9 {
                        return false;
                    }
                    for &rr in &self.col_rows[j] {
                        if !queued[rr] {
                            queued[rr] = true;
                            queue.push(rr);
                        }
                    }
                }
            }
        }
        true
    }

    fn tighten_lo(&self, j: usize, bound: f64, lo: &mut [f64], up: &[f64]) -> bool {
        let b = if self.is_int[j] { (bound - ROUND_TOL).ceil() } else { bound };
        let min_gain = if self.is_int[j] { 0.5 } else { 1e-6 * (1.0 + bound.abs()) + 1e-3 * (up[j] - lo[j]).min(1.0) };
        if b > lo[j] + min_gain {
            lo[j] = if self.is_int[j] { b } else { b.min(up[j]) };
            true
        } else {
            false
        }
    }

    fn tighten_up(&self, j: usize, bound: f64, lo: &[f64], up: &mut [f64]) -> bool {
        let b = if self.is_int[j] { (bound + ROUND_TOL).floor() } else { bound };
        let min_gain = if self.is_int[j] { 0.5 } else { 1e-6 * (1.0 + bound.abs()) + 1e-3 * (up[j] - lo[j]).min(1.0) };
        if b < up[j] - min_gain {
            up[j] = if self.is_int[j] { b } else { b.max(lo[j]) };
            true
        } else {
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{MilpModel, VarKind, VarRole};

    #[test]
    fn indicator_is_forced_by_count() {
        // phi - p / 10 >= 0, p >= 1 => phi = 1
        let mut m = MilpModel::new("t");
        m.add_var("p".into(), 1.0, 10.0, VarKind::Integer, VarRole::Free);
        m.add_var("phi".into(), 0.0, 1.0, VarKind::Binary, VarRole::Free);
        m.add_constraint("u".into(), vec![(1, 1.0), (0, -0.1)], Sense::Ge, 0.0);
        let lp = StdLp::from_model(&m);
        let p = Propagator::new(&lp, &[0, 1]);
        let (mut lo, mut up) = (lp.lo.clone(), lp.up.clone());
        assert!(p.run(&mut lo, &mut up, 10));
        assert_eq!(lo[1], 1.0);
    }

    #[test]
    fn detects_conflict() {
        let mut m = MilpModel::new("t");
        m.add_var("a".into(), 0.0, 1.0, VarKind::Binary, VarRole::Free);
        m.add_var("b".into(), 0.0, 1.0, VarKind::Binary, VarRole::Free);
        m.add_constraint("s".into(), vec![(0, 1.0), (1, 1.0)], Sense::Ge, 3.0);
        let lp = StdLp::from_model(&m);
        let p = Propagator::new(&lp, &[0, 1]);
        let (mut lo, mut up) = (lp.lo.clone(), lp.up.clone());
        assert!(!p.run(&mut lo, &mut up, 10));
    }
}
