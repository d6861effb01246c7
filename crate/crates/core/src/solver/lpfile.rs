//! CPLEX-style LP text export and `name value` solution import.

use std::collections::HashMap;
use std::fmt::Write;

use thiserror::Error;

use crate::milp::{decode_solution, MilpModel, OccupancySolution, VarKind};

const WRAP: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImportError {
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("imported point is infeasible: {0}")]
    Infeasible(String),
    #[error("model cannot be decoded: {0}")]
    Decode(String),
}

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v == 0.0 {
        "0".into()
    } else {
        format!("{v}")
    }
}

/// Appends `c name` terms, wrapping long lines with a leading space.
fn write_expr(out: &mut String, line_start: usize, terms: &[(usize, f64)], model: &MilpModel) {
    let mut line_len = out.len() - line_start;
    if terms.is_empty() {
        out.push_str(" 0");
        return;
    }
    for (k, &(j, c)) in terms.iter().enumerate() {
        let name = &model.variables[j].name;
        let sign = if c < 0.0 { "-" } else { "+" };
        let mag = c.abs();
        let coef = if mag == 1.0 { String::new() } else { format!("{} ", num(mag)) };
        let piece = if k == 0 && sign == "+" { format!(" {coef}{name}") } else { format!(" {sign} {coef}{name}") };
        if line_len + piece.len() > WRAP {
            out.push_str("\n ");
            line_len = 1;
        }
        line_len += piece.len();
        out.push_str(&piece);
    }
}

/// Writes the model in LP text format. Output depends only on the model.
pub fn export_lp(model: &MilpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ Model {}", model.name);
    out.push_str("Minimize\n");
    let start = out.len();
    out.push_str(" obj:");
    let mut obj = model.objective.clone();
    obj.sort_by_key(|t| t.0);
    let mut merged: Vec<(usize, f64)> = Vec::new();
    for (j, c) in obj {
        match merged.last_mut() {
            Some(l) if l.0 == j => l.1 += c,
            _ => merged.push((j, c)),
        }
    }
    merged.retain(|t| t.1 != 0.0);
    write_expr(&mut out, start, &merged, model);
    out.push('\n');
    out.push_str("Subject To\n");
    for c in &model.constraints {
        let start = out.len();
        let _ = write!(out, " {}:", c.name);
        write_expr(&mut out, start, &c.terms, model);
        let _ = writeln!(out, " {} {}", c.sense, num(c.rhs));
    }
    out.push_str("Bounds\n");
    for v in &model.variables {
        if v.kind == VarKind::Binary {
            continue;
        }
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {} free", v.name);
            }
            (true, false) => {
                let _ = writeln!(out, " {} >= {}", v.name, num(v.lower));
            }
            _ => {
                let _ = writeln!(out, " {} <= {} <= {}", num(v.lower), v.name, num(v.upper));
            }
        }
    }
    for (title, kind) in [("Generals", VarKind::Integer), ("Binaries", VarKind::Binary)] {
        let names: Vec<&str> = model.variables.iter().filter(|v| v.kind == kind).map(|v| v.name.as_str()).collect();
        if names.is_empty() {
            continue;
        }
        let _ = writeln!(out, "{title}");
        let mut line = String::new();
        for n in names {
            if line.len() + n.len() + 1 > WRAP {
                let _ = writeln!(out, "{line}");
                line.clear();
            }
            line.push(' ');
            line.push_str(n);
        }
        let _ = writeln!(out, "{line}");
    }
    out.push_str("End\n");
    out
}

/// Writes `name value` lines for every variable.
pub fn format_solution(model: &MilpModel, values: &[f64]) -> String {
    let mut out = String::from("# variable value\n");
    for (v, x) in model.variables.iter().zip(values) {
        let _ = writeln!(out, "{} {}", v.name, num(*x));
    }
    out
}

/// Parses `name value` lines; variables not mentioned are zero. The point is
/// checked against all bounds, integrality and rows.
pub fn import_values(text: &str, model: &MilpModel) -> Result<Vec<f64>, ImportError> {
    let index: HashMap<&str, usize> = model.variables.iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect();
    let mut x = vec![0.0; model.variables.len()];
    let mut seen = vec![false; x.len()];
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(val), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(ImportError::Format { line: line_no, msg: format!("expected `name value`, got `{line}`") });
        };
        let &j = index
            .get(name)
            .ok_or_else(|| ImportError::Format { line: line_no, msg: format!("unknown variable `{name}`") })?;
        let v: f64 = match val {
            "inf" => f64::INFINITY,
            "-inf" => f64::NEG_INFINITY,
            _ => val.parse().map_err(|_| ImportError::Format { line: line_no, msg: format!("bad number `{val}`") })?,
        };
        if seen[j] {
            return Err(ImportError::Format { line: line_no, msg: format!("duplicate variable `{name}`") });
        }
        seen[j] = true;
        x[j] = v;
    }
    model.check_point(&x, 1e-6, 1e-6).map_err(ImportError::Infeasible)?;
    Ok(x)
}

pub fn import_solution(text: &str, model: &MilpModel) -> Result<OccupancySolution, ImportError> {
    let x = import_values(text, model)?;
    decode_solution(model, &x).map_err(|e| ImportError::Decode(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtg::{EdgeCostParams, Scenario, TopoGraph};
    use crate::milp::{build_milp, VarRole};
    use crate::solver::{solve_milp, Budget};

    #[test]
    fn constraint_free_model() {
        let mut m = MilpModel::new("empty");
        m.add_var("y".into(), 0.0, 4.0, VarKind::Continuous, VarRole::Free);
        let text = export_lp(&m);
        assert_eq!(text, "\\ Model empty\nMinimize\n obj: 0\nSubject To\nBounds\n 0 <= y <= 4\nEnd\n");
    }

    #[test]
    fn export_is_stable_and_sections_present() {
        let g = TopoGraph::from_undirected(&[1, 2, 3], &[(1, 2), (2, 3)]).unwrap();
        let s = Scenario::simple(&g, 2, 4, 1, 3, 1, EdgeCostParams { w_bar: 3.5, a: 2, m: 1.0, r: 0.25 });
        let m = build_milp(&g, &s).unwrap();
        let a = export_lp(&m);
        assert_eq!(a, export_lp(&build_milp(&g, &s).unwrap()));
        for sec in ["Minimize", "Subject To", "Bounds", "Generals", "Binaries", "End"] {
            assert!(a.lines().any(|l| l == sec), "missing {sec}");
        }
        assert!(a.lines().all(|l| l.len() <= WRAP + 40));
        assert!(a.contains(" -inf <= cow_") || !a.contains("cow_"));
    }

    #[test]
    fn solution_round_trip() {
        let g = TopoGraph::from_undirected(&[1, 2, 3], &[(1, 2), (2, 3)]).unwrap();
        let s = Scenario::simple(&g, 2, 4, 1, 3, 2, EdgeCostParams { w_bar: 3.0, a: 2, m: 1.0, r: 0.0 });
        let m = build_milp(&g, &s).unwrap();
        let r = solve_milp(&m, Budget::default());
        let text = format_solution(&m, r.values.as_ref().unwrap());
        let sol = import_solution(&text, &m).unwrap();
        assert!((sol.objective - r.objective).abs() < 1e-6);
    }

    #[test]
    fn indexed_names_survive() {
        let mut m = MilpModel::new("n");
        m.add_var("p_3_7".into(), 0.0, 9.0, VarKind::Integer, VarRole::Free);
        let x = import_values("p_3_7 4 # trailing comment\n", &m).unwrap();
        assert_eq!(x, vec![4.0]);
        assert!(export_lp(&m).contains("p_3_7"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let mut m = MilpModel::new("n");
        m.add_var("a".into(), 0.0, 1.0, VarKind::Binary, VarRole::Free);
        let e = import_values("# header\n\na x\n", &m).unwrap_err();
        assert_eq!(e, ImportError::Format { line: 3, msg: "bad number `x`".into() });
        assert!(matches!(import_values("b 1\n", &m), Err(ImportError::Format { line: 1, .. })));
        assert!(matches!(import_values("a 0.5\n", &m), Err(ImportError::Infeasible(_))));
    }
}
