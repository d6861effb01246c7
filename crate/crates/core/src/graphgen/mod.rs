//! Terrain to topological graph: visibility maps, cover regions, paths and
//! overwatch benefits.

pub mod overwatch;
pub mod paths;
pub mod raster;
pub mod regions;
pub mod viewshed;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use overwatch::{compute_overwatch, refine_graph, OverwatchSampling, RawGraph, RefineParams, RefinedGraph};
pub use paths::{compute_one_path, compute_paths, path_cost, PathTable};
pub use raster::{ElevationGrid, Grid, GridGeometry, Mask, RasterError, VisibilityMap};
pub use regions::{get_cover_mask, get_cover_regions, place_nodes, split_regions, CoverRegion};
pub use viewshed::{compute_viewshed, compute_visibility_map, ObserverDistribution, ObserverPoint, SightParams};

#[derive(Debug, Error)]
pub enum GraphGenError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unreachable: {0}")]
    Reachability(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphGenParams {
    /// Viewshed samples per visibility map.
    pub samples: usize,
    /// Cover threshold on visibility.
    pub nu: f64,
    pub xi_min: usize,
    pub xi_max: usize,
    pub lambda_p: f64,
    pub d_max: f64,
    /// Distance cutoff for overwatch maps.
    pub ow_d_max: f64,
    pub eps: f64,
    /// Eye height of robots providing overwatch.
    pub robot_eye_height: f64,
    pub sight: SightParams,
    pub seed: u64,
}

impl Default for GraphGenParams {
    fn default() -> Self {
        Self {
            samples: 32,
            nu: 0.2,
            xi_min: 8,
            xi_max: 200,
            lambda_p: 5.0,
            d_max: 300.0,
            ow_d_max: 150.0,
            eps: paths::DEFAULT_EPSILON,
            robot_eye_height: 1.0,
            sight: SightParams::default(),
            seed: 0,
        }
    }
}

/// Everything produced on the way from terrain to a raw graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedGraph {
    pub visibility: VisibilityMap,
    pub cover: Mask,
    pub raw: RawGraph,
}

/// Runs the full construction: visibility, cover, regions, nodes, paths and
/// overwatch rows. Split fragments no larger than `xi_min` are dropped.
pub fn generate_graph(
    dem: &ElevationGrid,
    obstacles: &Mask,
    observers: &ObserverDistribution,
    p: &GraphGenParams,
) -> Result<GeneratedGraph, GraphGenError> {
    if !dem.same_shape(obstacles) {
        return Err(GraphGenError::Domain("elevation and obstacle grids differ in shape".into()));
    }
    if p.xi_max <= p.xi_min {
        return Err(GraphGenError::Domain("xi_max must exceed xi_min".into()));
    }
    let visibility = compute_visibility_map(dem, observers, p.samples, p.d_max, p.seed, p.sight)?;
    let cover = get_cover_mask(&visibility, p.nu, obstacles)?;
    let regions = get_cover_regions(&cover, p.xi_min);
    let regions: Vec<CoverRegion> = split_regions(&dem.geom, regions, p.xi_max)?
        .into_iter()
        .filter(|r| r.area() > p.xi_min)
        .enumerate()
        .map(|(id, r)| CoverRegion { id, ..r })
        .collect();
    if regions.len() < 2 {
        return Err(GraphGenError::Domain(format!("only {} cover regions found", regions.len())));
    }
    let nodes = place_nodes(obstacles, &regions)?;
    let paths = compute_paths(&visibility, obstacles, &regions, &nodes, p.lambda_p, p.eps)?;
    let sampling = OverwatchSampling {
        samples: p.samples,
        d_max: p.ow_d_max,
        seed: p.seed.wrapping_add(1),
        eye_height: p.robot_eye_height,
        sight: p.sight,
        eps: p.eps,
    };
    let overwatch = compute_overwatch(dem, &regions, &paths, &sampling)?;
    Ok(GeneratedGraph { visibility, cover, raw: RawGraph { geom: dem.geom, regions, nodes, paths, overwatch } })
}

/// Rolling synthetic terrain with a few ridges and knolls, used by demos and
/// tests in place of a surveyed elevation model.
pub fn synthetic_meadow(width: usize, height: usize, resolution: f64, seed: u64) -> ElevationGrid {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.random_range(0.0..width as f64),
                rng.random_range(0.0..height as f64),
                rng.random_range(3.0..9.0),
                rng.random_range(0.06..0.16) * width.max(height) as f64,
            )
        })
        .collect();
    Grid::from_fn(GridGeometry::new(width, height, resolution), |(r, c)| {
        bumps
            .iter()
            .map(|&(bx, by, amp, s)| {
                let d2 = (c as f64 - bx).powi(2) + (r as f64 - by).powi(2);
                amp * (-d2 / (2.0 * s * s)).exp()
            })
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> (ElevationGrid, Mask, ObserverDistribution, GraphGenParams) {
        let dem = synthetic_meadow(48, 40, 1.0, 5);
        let obstacles = Grid::filled(dem.geom, false);
        let obs = ObserverDistribution::gaussian([24.0, 20.0], [[4.0, 0.0], [0.0, 4.0]], 1.7);
        let p = GraphGenParams {
            samples: 6,
            nu: 0.35,
            xi_min: 6,
            xi_max: 120,
            d_max: 40.0,
            ow_d_max: 30.0,
            ..GraphGenParams::default()
        };
        (dem, obstacles, obs, p)
    }

    #[test]
    fn pipeline_is_deterministic_and_consistent() {
        let (dem, obstacles, obs, p) = scene();
        let a = generate_graph(&dem, &obstacles, &obs, &p).unwrap();
        let b = generate_graph(&dem, &obstacles, &obs, &p).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        regions::check_regions(&dem.geom, &a.raw.regions).unwrap();
        for r in &a.raw.regions {
            assert!(r.area() > p.xi_min && r.area() <= p.xi_max);
        }
        for e in &a.raw.paths.entries {
            assert!(e.path.cells.windows(2).all(|w| w[0].0.abs_diff(w[1].0) <= 1 && w[0].1.abs_diff(w[1].1) <= 1));
            assert!(e.path.cells.iter().all(|&c| !*obstacles.get(c)));
        }
        let n = a.raw.nodes.len();
        for v in (0..n).filter(|v| !a.raw.paths.disconnected.contains(v)) {
            assert!(a.raw.paths.in_degree(v) >= 1 && a.raw.paths.out_degree(v) >= 1, "node {v}");
        }
        let refined = refine_graph(&a.raw, &RefineParams::default()).unwrap();
        assert!(refined.graph.num_edges() > 0);
        assert!(a.raw.overwatch.iter().all(|r| r.weights.iter().all(|w| w.benefit >= 0.0)));
    }
}
