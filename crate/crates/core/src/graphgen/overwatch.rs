//! Overwatch benefit matrices and the refinement from raw paths to a
//! planning graph.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::paths::{path_cost, polyline, polyline_length, PathTable};
use super::raster::{Cell, ElevationGrid, GridGeometry};
use super::regions::CoverRegion;
use super::viewshed::{compute_visibility_map, ObserverDistribution, SightParams};
use super::GraphGenError;
use crate::dtg::{EdgeCostParams, EdgeParamEntry, Loc, Node, NodeId, OverwatchOpportunity, TopoGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeBenefit {
    pub from: usize,
    pub to: usize,
    pub benefit: f64,
}

/// `W_ow(v)(j, k)` for one watcher node `v`, in path-table order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OverwatchRow {
    pub weights: Vec<EdgeBenefit>,
}

impl OverwatchRow {
    pub fn get(&self, from: usize, to: usize) -> Option<f64> {
        self.weights.iter().find(|w| w.from == from && w.to == to).map(|w| w.benefit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverwatchSampling {
    pub samples: usize,
    pub d_max: f64,
    pub seed: u64,
    /// Eye height of a watching robot above terrain.
    pub eye_height: f64,
    pub sight: SightParams,
    pub eps: f64,
}

/// Per-watcher overwatch benefits over every path in `paths`, from an
/// overwatch map sampled uniformly over the watcher's region.
pub fn compute_overwatch(
    dem: &ElevationGrid,
    regions: &[CoverRegion],
    paths: &PathTable,
    cfg: &OverwatchSampling,
) -> Result<Vec<OverwatchRow>, GraphGenError> {
    regions
        .iter()
        .enumerate()
        .map(|(v, region)| {
            let dist = ObserverDistribution::region(region.cells.clone(), cfg.eye_height);
            let seed = cfg.seed ^ (v as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let map = compute_visibility_map(dem, &dist, cfg.samples, cfg.d_max, seed, cfg.sight)?;
            let weights = paths
                .entries
                .iter()
                .map(|e| EdgeBenefit { from: e.from, to: e.to, benefit: path_cost(&map, &e.path.cells, cfg.eps) })
                .collect();
            Ok(OverwatchRow { weights })
        })
        .collect()
}

/// Output of graph generation before refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawGraph {
    pub geom: GridGeometry,
    pub regions: Vec<CoverRegion>,
    pub nodes: Vec<Cell>,
    pub paths: PathTable,
    pub overwatch: Vec<OverwatchRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineParams {
    /// Paths longer than this (world units) are dropped.
    pub max_edge_len: f64,
    /// Both endpoints of a watched edge must be this close to the watcher.
    pub max_ow_dist: f64,
    pub ow_scale: f64,
    pub min_frac: f64,
    pub max_frac: f64,
    pub alpha: u32,
    pub gamma: f64,
    /// Formation parameters applied to every edge.
    pub formation_size: u32,
    pub formation_penalty: f64,
    pub formation_reward: f64,
    /// Cost per world unit of path length added to the visibility cost.
    pub length_weight: f64,
    /// Lower bound on edge weights; hidden paths would otherwise cost 0.
    pub min_weight: f64,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self {
            max_edge_len: f64::MAX,
            max_ow_dist: f64::MAX,
            ow_scale: 1.0,
            min_frac: 0.4,
            max_frac: 0.9,
            alpha: 2,
            gamma: 0.0,
            formation_size: 1,
            formation_penalty: 0.0,
            formation_reward: 0.0,
            length_weight: 0.0,
            min_weight: 1.0,
        }
    }
}

impl RefineParams {
    pub fn validate(&self) -> Result<(), GraphGenError> {
        let frac_ok = |f: f64| f > 0.0 && f <= 1.0;
        if !frac_ok(self.min_frac) || !frac_ok(self.max_frac) {
            return Err(GraphGenError::Domain(format!(
                "overwatch fractions must lie in (0, 1], got min {} max {}",
                self.min_frac, self.max_frac
            )));
        }
        if self.min_frac > self.max_frac {
            return Err(GraphGenError::Domain("min_frac exceeds max_frac".into()));
        }
        if !(self.max_edge_len > 0.0) || !(self.max_ow_dist > 0.0) || !(self.ow_scale >= 0.0) {
            return Err(GraphGenError::Domain("edge length, overwatch distance and scale must be positive".into()));
        }
        if !(self.min_weight > 0.0) || !(self.length_weight >= 0.0) {
            return Err(GraphGenError::Domain("min_weight must be positive and length_weight nonnegative".into()));
        }
        Ok(())
    }
}

/// Planning graph plus per-edge cost parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedGraph {
    pub graph: TopoGraph,
    pub edge_params: Vec<EdgeParamEntry>,
}

fn node_id(i: usize) -> NodeId {
    NodeId(i as u32 + 1)
}

/// Node ids are region index + 1; disconnected nodes are left out.
pub fn refine_graph(raw: &RawGraph, params: &RefineParams) -> Result<RefinedGraph, GraphGenError> {
    params.validate()?;
    let geom = raw.geom;
    let pos: Vec<[f64; 2]> = raw.nodes.iter().map(|&c| geom.center(c)).collect();
    let nodes: Vec<Node> = (0..raw.nodes.len())
        .filter(|v| !raw.paths.disconnected.contains(v))
        .map(|v| Node { id: node_id(v), x: pos[v][0], y: pos[v][1] })
        .collect();

    let mut edges: Vec<Loc> = Vec::new();
    let mut edge_paths = BTreeMap::new();
    let mut w_bar: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for e in &raw.paths.entries {
        let pts = polyline(&geom, &e.path.cells);
        let len = polyline_length(&pts);
        if len > params.max_edge_len {
            continue;
        }
        let loc = (node_id(e.from), node_id(e.to));
        edges.push(loc);
        edge_paths.insert(loc, pts);
        w_bar.insert((e.from, e.to), (e.vis_cost + params.length_weight * len).max(params.min_weight));
    }

    let dist = |a: usize, b: usize| ((pos[a][0] - pos[b][0]).powi(2) + (pos[a][1] - pos[b][1]).powi(2)).sqrt();
    let mut overwatch = Vec::new();
    for (v, row) in raw.overwatch.iter().enumerate() {
        if raw.paths.disconnected.contains(&v) {
            continue;
        }
        for &EdgeBenefit { from: j, to: k, benefit } in &row.weights {
            let Some(&w) = w_bar.get(&(j, k)) else { continue };
            if w <= 0.0 {
                continue;
            }
            if dist(v, j) > params.max_ow_dist || dist(v, k) > params.max_ow_dist {
                continue;
            }
            let scaled = benefit * params.ow_scale;
            if scaled < params.min_frac * w {
                continue;
            }
            overwatch.push(OverwatchOpportunity {
                watcher: node_id(v),
                edge: (node_id(j), node_id(k)),
                omega: scaled.min(params.max_frac * w),
                alpha: params.alpha,
                gamma: params.gamma,
            });
        }
    }

    let edge_params = w_bar
        .iter()
        .map(|(&(j, k), &w)| EdgeParamEntry {
            edge: (node_id(j), node_id(k)),
            params: EdgeCostParams {
                w_bar: w,
                a: params.formation_size,
                m: params.formation_penalty,
                r: params.formation_reward,
            },
        })
        .collect();
    let graph = TopoGraph::new(nodes, edges, edge_paths, overwatch)
        .map_err(|e| GraphGenError::Domain(format!("refined graph is malformed: {e}")))?;
    Ok(RefinedGraph { graph, edge_params })
}
