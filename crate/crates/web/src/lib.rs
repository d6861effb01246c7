//! Browser bindings: solve a reference scenario, step MPPI around a wall,
//! and score a protection log.

use std::fmt::Write as _;

use serde_json::json;
use wasm_bindgen::prelude::*;

use overwatch_core::fixtures;
use overwatch_core::graphgen::raster::{Grid, GridGeometry};
use overwatch_core::harness::{graph_svg, metric_report, plan_svg, ProtectionEntry, ProtectionLog, RenderStyle};
use overwatch_core::local_planner::{
    dubins_step, mppi_plan, CostMap, KinematicParams, MppiParams, RobotState, StageContext, StageWeights,
};
use overwatch_core::mid_level::{allocate_routes, ArcPath};
use overwatch_core::milp::build_milp;
use overwatch_core::solver::{solve_milp, Budget};

/// The browser has no monotonic clock for the solver, so the budget is in
/// branch-and-bound nodes.
const NODE_BUDGET: u64 = 20_000;

pub fn solve_fixture_json(name: &str) -> Result<String, String> {
    let (g, s) = match name {
        "illustrative" => fixtures::illustrative(),
        "bounding" => fixtures::bounding(),
        "leapfrog" => fixtures::leapfrog(),
        other => return Err(format!("unknown scenario {other:?}")),
    };
    let model = build_milp(&g, &s).map_err(|e| e.to_string())?;
    let r = solve_milp(&model, Budget::nodes(NODE_BUDGET));
    let style = RenderStyle { width: 560.0, height: 420.0, ..RenderStyle::default() };
    let plan = match &r.incumbent {
        Some(sol) => {
            let routes = allocate_routes(&g, &sol.p, s.n_robots).map_err(|e| e.to_string())?;
            Some(plan_svg(&g, &routes, style))
        }
        None => None,
    };
    Ok(json!({
        "status": r.status,
        "objective": r.incumbent.as_ref().map(|_| r.objective),
        "bound": r.bound,
        "nodes": r.nodes_explored,
        "variables": model.variables.len(),
        "constraints": model.constraints.len(),
        "graph_svg": graph_svg(&g, style),
        "plan_svg": plan,
    })
    .to_string())
}

fn wall_map() -> CostMap {
    // wall across y in [3, 5] with a gap at x in [8, 10]
    let geom = GridGeometry::new(12, 10, 1.0);
    CostMap { grid: Grid::from_fn(geom, |(r, c)| if (3..5).contains(&r) && c < 8 { 255u8 } else { 0 }) }
}

/// Receding-horizon MPPI from the lower left corner to `goal` past a wall.
/// Returns the executed trajectory drawn over the cost map.
pub fn mppi_demo_json(goal: [f64; 2], samples: usize, seed: u64) -> Result<String, String> {
    let map = wall_map();
    let geom = map.grid.geom;
    let start = [2.0, 1.5];
    if map.value_at(goal) > 0.0 {
        return Err("goal is inside the wall or off the map".into());
    }
    let path = ArcPath::new(vec![start, [9.0, 1.5], [9.0, goal[1]], goal]);
    let mut ctx = StageContext::simple([goal[0], goal[1], 0.0], path.clone());
    ctx.weights = StageWeights::default();
    ctx.costmap = Some(map);
    let p = MppiParams { samples: samples.clamp(1, 2048), horizon: 20, ..MppiParams::default() };
    let k = KinematicParams::default();
    let mut x = RobotState::at(start, 0.0);
    let mut nominal = vec![[0.0, 0.0]; p.horizon];
    let mut xs = vec![x];
    let mut reached = false;
    for i in 0..800u64 {
        nominal = mppi_plan(&x, &ctx, &k, &nominal, &p, seed.wrapping_mul(1_000_003).wrapping_add(i));
        x = dubins_step(&x, nominal[0], &k);
        xs.push(x);
        nominal.rotate_left(1);
        let n = nominal.len();
        nominal[n - 1] = nominal[n - 2];
        if (goal[0] - x.p[0]).hypot(goal[1] - x.p[1]) < ctx.pointing_radius {
            reached = true;
            break;
        }
    }
    let map = ctx.costmap.as_ref().expect("set above");
    let collided = xs.iter().any(|s| map.value_at(s.p) >= ctx.lethal);

    let scale = 40.0;
    let (w, h) = (geom.width as f64 * geom.resolution, geom.height as f64 * geom.resolution);
    let sx = |v: f64| v * scale;
    let sy = |v: f64| (h - v) * scale;
    let mut svg = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}">"#,
        w * scale,
        h * scale,
        w * scale,
        h * scale
    );
    svg.push_str(r##"<rect width="100%" height="100%" fill="#f6f6f2"/>"##);
    for i in 0..geom.len() {
        let cell = geom.cell_of(i);
        if *map.grid.get(cell) > 0 {
            let c = geom.center(cell);
            let half = geom.resolution / 2.0;
            let _ = write!(
                svg,
                r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="#444"/>"##,
                sx(c[0] - half),
                sy(c[1] + half),
                geom.resolution * scale,
                geom.resolution * scale
            );
        }
    }
    let poly = |pts: &mut dyn Iterator<Item = [f64; 2]>| {
        pts.map(|q| format!("{:.1},{:.1}", sx(q[0]), sy(q[1]))).collect::<Vec<_>>().join(" ")
    };
    let _ = write!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#9ab" stroke-dasharray="6 4" stroke-width="2"/>"##,
        poly(&mut path.points.iter().copied())
    );
    let _ = write!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#c33" stroke-width="3"/>"##,
        poly(&mut xs.iter().map(|s| s.p))
    );
    let _ = write!(svg, r##"<circle cx="{:.1}" cy="{:.1}" r="6" fill="#2a7"/>"##, sx(goal[0]), sy(goal[1]));
    svg.push_str("</svg>");
    let last = xs.last().expect("starts with x0").p;
    Ok(json!({ "svg": svg, "steps": xs.len() - 1, "reached": reached, "collided": collided, "final": last })
        .to_string())
}

/// Protection metric of a JSON log, idle robots excluded.
pub fn protection_json(text: &str) -> Result<String, String> {
    let log: ProtectionLog = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let r = metric_report(&log).map_err(|e| e.to_string())?;
    serde_json::to_string(&r).map_err(|e| e.to_string())
}

pub fn example_log_json() -> String {
    let e = |robot: &str, edge: (u32, u32), d_o, d_f, d_c, total| ProtectionEntry {
        robot: robot.into(),
        edge: (overwatch_core::dtg::NodeId(edge.0), overwatch_core::dtg::NodeId(edge.1)),
        d_o,
        d_f,
        d_c,
        total,
    };
    let log = ProtectionLog {
        entries: vec![
            e("r01", (1, 2), 10.0, 10.0, 4.0, 10.0),
            e("r01", (2, 4), 0.0, 6.0, 6.0, 6.0),
            e("r02", (1, 2), 0.0, 10.0, 2.0, 10.0),
            e("r02", (2, 4), 0.0, 6.0, 0.0, 6.0),
        ],
    };
    serde_json::to_string_pretty(&log).expect("plain structs serialize")
}

#[wasm_bindgen]
pub fn solve_fixture(name: &str) -> Result<String, JsError> {
    solve_fixture_json(name).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn mppi_demo(goal_x: f64, goal_y: f64, samples: usize, seed: u64) -> Result<String, JsError> {
    mppi_demo_json([goal_x, goal_y], samples, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn protection(log_json: &str) -> Result<String, JsError> {
    protection_json(log_json).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn example_log() -> String {
    example_log_json()
}
