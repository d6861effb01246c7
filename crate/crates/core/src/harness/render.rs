//! Deterministic SVG and DOT output for graphs, plans and rasters.

use std::fmt::Write;

use crate::dtg::{Loc, TopoGraph};
use crate::graphgen::raster::Grid;
use crate::mid_level::RobotRoutes;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderStyle {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
    pub node_radius: f64,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self { width: 800.0, height: 600.0, margin: 40.0, node_radius: 6.0 }
    }
}

const PALETTE: [&str; 8] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

/// World-to-canvas transform keeping the aspect ratio; world y points up.
struct View {
    min: [f64; 2],
    scale: f64,
    style: RenderStyle,
}

impl View {
    fn fit(points: impl Iterator<Item = [f64; 2]>, style: RenderStyle) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points {
            for i in 0..2 {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        if !lo[0].is_finite() {
            lo = [0.0, 0.0];
            hi = [1.0, 1.0];
        }
        let span = [(hi[0] - lo[0]).max(1e-9), (hi[1] - lo[1]).max(1e-9)];
        let scale = ((style.width - 2.0 * style.margin) / span[0]).min((style.height - 2.0 * style.margin) / span[1]);
        Self { min: lo, scale, style }
    }

    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        (
            self.style.margin + (p[0] - self.min[0]) * self.scale,
            self.style.height - self.style.margin - (p[1] - self.min[1]) * self.scale,
        )
    }
}

fn svg_open(out: &mut String, style: &RenderStyle) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = style.width,
        h = style.height
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
}

fn node_pos(graph: &TopoGraph, v: crate::dtg::NodeId) -> [f64; 2] {
    graph.node(v).map_or([0.0, 0.0], |n| [n.x, n.y])
}

fn edge_points(graph: &TopoGraph, loc: Loc) -> Vec<[f64; 2]> {
    match graph.edge_path(loc) {
        Some(p) if p.len() >= 2 => p.to_vec(),
        _ => vec![node_pos(graph, loc.0), node_pos(graph, loc.1)],
    }
}

fn polyline(view: &View, pts: &[[f64; 2]]) -> String {
    pts.iter()
        .map(|&p| {
            let (x, y) = view.map(p);
            format!("{x:.2},{y:.2}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn graph_points(graph: &TopoGraph) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = graph.nodes().iter().map(|n| [n.x, n.y]).collect();
    pts.extend(graph.edge_paths().values().flatten().copied());
    pts
}

fn draw_graph(out: &mut String, graph: &TopoGraph, view: &View) {
    let _ = writeln!(out, r##"<g id="edges" stroke="#999999" stroke-width="1.5" fill="none">"##);
    for &(a, b) in graph.locations() {
        // draw each undirected pair once
        if a == b || (a > b && graph.loc_index((b, a)).is_some()) {
            continue;
        }
        let _ = writeln!(out, r#"<polyline points="{}"/>"#, polyline(view, &edge_points(graph, (a, b))));
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r##"<g id="overwatch" stroke="#2ca02c" stroke-width="1" stroke-dasharray="4 3">"##);
    for o in graph.overwatch() {
        let pts = edge_points(graph, o.edge);
        let mid = pts[pts.len() / 2];
        let (x1, y1) = view.map(node_pos(graph, o.watcher));
        let (x2, y2) = view.map(mid);
        let _ = writeln!(out, r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}"/>"#);
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r##"<g id="nodes" font-family="sans-serif" font-size="11">"##);
    for n in graph.nodes() {
        let (x, y) = view.map([n.x, n.y]);
        let r = view.style.node_radius;
        let _ = writeln!(out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="{r}" fill="#333333"/>"##);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x + r + 2.0, y - r, n.id.0);
    }
    let _ = writeln!(out, "</g>");
}

/// Graph with nodes, edges and dashed watch lines.
pub fn graph_svg(graph: &TopoGraph, style: RenderStyle) -> String {
    let view = View::fit(graph_points(graph).into_iter(), style);
    let mut out = String::new();
    svg_open(&mut out, &style);
    draw_graph(&mut out, graph, &view);
    out.push_str("</svg>\n");
    out
}

/// Position drawn for a location: the node, or the middle of the edge.
fn marker_pos(graph: &TopoGraph, loc: Loc) -> [f64; 2] {
    if loc.0 == loc.1 {
        node_pos(graph, loc.0)
    } else {
        let pts = edge_points(graph, loc);
        let n = pts.len();
        if n % 2 == 1 {
            pts[n / 2]
        } else {
            let (a, b) = (pts[n / 2 - 1], pts[n / 2]);
            [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
        }
    }
}

/// Robots with identical routes, in first-robot order.
pub fn coalition_routes(routes: &RobotRoutes) -> Vec<(Vec<usize>, &[usize])> {
    let mut out: Vec<(Vec<usize>, &[usize])> = Vec::new();
    for (i, r) in routes.routes.iter().enumerate() {
        match out.iter_mut().find(|(_, rr)| *rr == r.as_slice()) {
            Some((ids, _)) => ids.push(i),
            None => out.push((vec![i], r.as_slice())),
        }
    }
    out
}

/// Graph with one coloured route per coalition and square markers labelled
/// t0, t1, ... at each step's location.
pub fn plan_svg(graph: &TopoGraph, routes: &RobotRoutes, style: RenderStyle) -> String {
    let view = View::fit(graph_points(graph).into_iter(), style);
    let mut out = String::new();
    svg_open(&mut out, &style);
    draw_graph(&mut out, graph, &view);
    for (k, (ids, route)) in coalition_routes(routes).iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let members = ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, r#"<g class="coalition" data-robots="{members}" stroke="{color}" fill="{color}">"#);
        let mut pts = Vec::new();
        for &l in route.iter() {
            let loc = graph.location(l);
            if loc.0 == loc.1 {
                pts.push(node_pos(graph, loc.0));
            } else {
                pts.extend(edge_points(graph, loc));
            }
        }
        pts.dedup();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke-width="3" opacity="0.6"/>"#,
            polyline(&view, &pts)
        );
        // a small per-coalition offset keeps coincident markers legible
        let off = 4.0 * k as f64;
        for (t, &l) in route.iter().enumerate() {
            let (x, y) = view.map(marker_pos(graph, graph.location(l)));
            let (x, y) = (x + off, y + off);
            let _ = writeln!(out, r#"<rect x="{:.2}" y="{:.2}" width="7" height="7"/>"#, x - 3.5, y - 3.5);
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="9" stroke="none">t{t}</text>"#,
                x + 5.0,
                y + 10.0
            );
        }
        let _ = writeln!(out, "</g>");
    }
    out.push_str("</svg>\n");
    out
}

/// Grey-scale raster, dark for low values. Cells are drawn top row first.
pub fn raster_svg(grid: &Grid<f64>, style: RenderStyle) -> String {
    let g = grid.geom;
    let mut out = String::new();
    svg_open(&mut out, &style);
    if g.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let (lo, hi) = grid
        .data
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let cw = (style.width - 2.0 * style.margin) / g.width as f64;
    let ch = (style.height - 2.0 * style.margin) / g.height as f64;
    let cs = cw.min(ch);
    let _ = writeln!(out, r#"<g id="raster" shape-rendering="crispEdges">"#);
    for r in 0..g.height {
        for c in 0..g.width {
            let v = *grid.get((r, c));
            let level = if v.is_finite() { ((v - lo) / span * 255.0).round() as u8 } else { 0 };
            let x = style.margin + c as f64 * cs;
            let y = style.margin + (g.height - 1 - r) as f64 * cs;
            let _ = writeln!(
                out,
                r##"<rect x="{x:.2}" y="{y:.2}" width="{cs:.3}" height="{cs:.3}" fill="#{level:02x}{level:02x}{level:02x}"/>"##
            );
        }
    }
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    out
}

pub fn graph_dot(graph: &TopoGraph) -> String {
    let mut out = String::from("digraph dtg {\n");
    for n in graph.nodes() {
        let _ = writeln!(out, "  n{} [label=\"{}\", pos=\"{:.3},{:.3}!\"];", n.id.0, n.id.0, n.x, n.y);
    }
    for &(a, b) in graph.locations() {
        if a != b {
            let _ = writeln!(out, "  n{} -> n{};", a.0, b.0);
        }
    }
    for o in graph.overwatch() {
        let _ = writeln!(
            out,
            "  n{} -> n{} [style=dashed, color=green, label=\"watch {}-{}\"];",
            o.watcher.0, o.edge.0 .0, o.edge.0 .0, o.edge.1 .0
        );
    }
    out.push_str("}\n");
    out
}

/// Graph with each coalition's moves as labelled coloured edges.
pub fn plan_dot(graph: &TopoGraph, routes: &RobotRoutes) -> String {
    let mut out = graph_dot(graph);
    out.truncate(out.len() - 2);
    for (k, (ids, route)) in coalition_routes(routes).iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        for (t, &l) in route.iter().enumerate() {
            let (a, b) = graph.location(l);
            if a != b {
                let _ = writeln!(
                    out,
                    "  n{} -> n{} [color=\"{color}\", penwidth=2, label=\"t{t} x{}\"];",
                    a.0,
                    b.0,
                    ids.len()
                );
            }
        }
    }
    out.push_str("}\n");
    out
}
