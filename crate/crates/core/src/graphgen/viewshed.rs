//! Line-of-sight viewsheds and sampled, distance-weighted visibility maps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::raster::{Cell, ElevationGrid, Grid, GridGeometry, Mask, VisibilityMap};
use super::GraphGenError;

/// Heights used for line-of-sight tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SightParams {
    /// Height of the observed point above terrain.
    pub target_height: f64,
}

impl Default for SightParams {
    fn default() -> Self {
        Self { target_height: 0.5 }
    }
}

/// One observer position: world point and eye height above terrain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObserverPoint {
    pub x: f64,
    pub y: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObserverComponent {
    Point {
        position: [f64; 2],
        height: f64,
    },
    Gaussian {
        mean: [f64; 2],
        cov: [[f64; 2]; 2],
        height: f64,
    },
    /// Uniform over the listed cells.
    Region {
        cells: Vec<Cell>,
        height: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedComponent {
    pub weight: f64,
    #[serde(flatten)]
    pub component: ObserverComponent,
}

/// Mixture over observer positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverDistribution {
    pub components: Vec<WeightedComponent>,
}

impl ObserverDistribution {
    pub fn point(x: f64, y: f64, height: f64) -> Self {
        Self::single(ObserverComponent::Point { position: [x, y], height })
    }

    pub fn gaussian(mean: [f64; 2], cov: [[f64; 2]; 2], height: f64) -> Self {
        Self::single(ObserverComponent::Gaussian { mean, cov, height })
    }

    pub fn region(cells: Vec<Cell>, height: f64) -> Self {
        Self::single(ObserverComponent::Region { cells, height })
    }

    fn single(component: ObserverComponent) -> Self {
        Self { components: vec![WeightedComponent { weight: 1.0, component }] }
    }

    pub fn validate(&self) -> Result<(), GraphGenError> {
        if self.components.is_empty() {
            return Err(GraphGenError::Domain("observer distribution has no components".into()));
        }
        for wc in &self.components {
            if !(wc.weight > 0.0) {
                return Err(GraphGenError::Domain("component weights must be positive".into()));
            }
            match &wc.component {
                ObserverComponent::Gaussian { cov, .. } => {
                    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
                    if !(cov[0][0] > 0.0 && det > 0.0) || (cov[0][1] - cov[1][0]).abs() > 1e-12 {
                        return Err(GraphGenError::Domain(format!("covariance {cov:?} is not positive definite")));
                    }
                }
                ObserverComponent::Region { cells, .. } if cells.is_empty() => {
                    return Err(GraphGenError::Domain("region observer has no cells".into()));
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn sample(&self, geom: &GridGeometry, rng: &mut ChaCha8Rng) -> ObserverPoint {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = &self.components[self.components.len() - 1].component;
        for c in &self.components {
            if u < c.weight {
                pick = &c.component;
                break;
            }
            u -= c.weight;
        }
        match pick {
            ObserverComponent::Point { position, height } => {
                ObserverPoint { x: position[0], y: position[1], height: *height }
            }
            ObserverComponent::Gaussian { mean, cov, height } => {
                let l11 = cov[0][0].sqrt();
                let l21 = cov[1][0] / l11;
                let l22 = (cov[1][1] - l21 * l21).sqrt();
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                ObserverPoint { x: mean[0] + l11 * z1, y: mean[1] + l21 * z1 + l22 * z2, height: *height }
            }
            ObserverComponent::Region { cells, height } => {
                let cell = cells[rng.random_range(0..cells.len())];
                let c = geom.center(cell);
                let h = geom.resolution;
                let dx = (rng.random::<f64>() - 0.5) * h;
                let dy = (rng.random::<f64>() - 0.5) * h;
                ObserverPoint { x: c[0] + dx, y: c[1] + dy, height: *height }
            }
        }
    }
}

fn lerp(a: f64, b: f64, f: f64) -> f64 {
    if f <= 0.0 {
        a
    } else if f >= 1.0 {
        b
    } else {
        a * (1.0 - f) + b * f
    }
}

/// Terrain height at a point on the column-centre line `col`, interpolated
/// between the two rows around continuous row coordinate `y`.
fn height_on_col(dem: &ElevationGrid, col: usize, y: f64) -> f64 {
    let h = dem.geom.height;
    let t = y - 0.5;
    let r0 = t.floor().clamp(0.0, (h - 1) as f64) as usize;
    let r1 = (r0 + 1).min(h - 1);
    lerp(*dem.get((r0, col)), *dem.get((r1, col)), t - r0 as f64)
}

fn height_on_row(dem: &ElevationGrid, row: usize, x: f64) -> f64 {
    let w = dem.geom.width;
    let t = x - 0.5;
    let c0 = t.floor().clamp(0.0, (w - 1) as f64) as usize;
    let c1 = (c0 + 1).min(w - 1);
    lerp(*dem.get((row, c0)), *dem.get((row, c1)), t - c0 as f64)
}

/// True when the straight sight line from `o` (grid coords, height `ho`) to
/// the centre of `target` (height `ht`) stays above the terrain at every
/// crossing of a row- or column-centre line strictly between them.
fn line_of_sight(dem: &ElevationGrid, o: [f64; 2], ho: f64, target: Cell, ht: f64) -> bool {
    let t = [target.1 as f64 + 0.5, target.0 as f64 + 0.5];
    let (dx, dy) = (t[0] - o[0], t[1] - o[1]);
    let clear = |s: f64, terrain: f64| terrain <= ho + s * (ht - ho) + 1e-9;
    if dx != 0.0 {
        let (a, b) = (o[0].min(t[0]), o[0].max(t[0]));
        let first = (a - 0.5).floor() as i64 + 1;
        let mut c = first.max(0);
        while (c as f64 + 0.5) < b {
            let x = c as f64 + 0.5;
            if x > a {
                let s = (x - o[0]) / dx;
                if s > 0.0 && s < 1.0 && !clear(s, height_on_col(dem, c as usize, o[1] + s * dy)) {
                    return false;
                }
            }
            c += 1;
        }
    }
    if dy != 0.0 {
        let (a, b) = (o[1].min(t[1]), o[1].max(t[1]));
        let first = (a - 0.5).floor() as i64 + 1;
        let mut r = first.max(0);
        while (r as f64 + 0.5) < b {
            let y = r as f64 + 0.5;
            if y > a {
                let s = (y - o[1]) / dy;
                if s > 0.0 && s < 1.0 && !clear(s, height_on_row(dem, r as usize, o[0] + s * dx)) {
                    return false;
                }
            }
            r += 1;
        }
    }
    true
}

fn check_dem(dem: &ElevationGrid) -> Result<(), GraphGenError> {
    if dem.geom.is_empty() || !(dem.geom.resolution > 0.0) {
        return Err(GraphGenError::Domain("elevation grid must be nonempty with positive resolution".into()));
    }
    if dem.data.iter().any(|h| !h.is_finite()) {
        return Err(GraphGenError::Domain("elevation grid has non-finite heights".into()));
    }
    Ok(())
}

/// Binary viewshed from `observer`.
pub fn compute_viewshed(
    dem: &ElevationGrid,
    observer: ObserverPoint,
    sight: SightParams,
) -> Result<Mask, GraphGenError> {
    check_dem(dem)?;
    let ocell = dem.geom.locate([observer.x, observer.y]).ok_or_else(|| {
        GraphGenError::Domain(format!("observer ({}, {}) is outside the grid", observer.x, observer.y))
    })?;
    Ok(viewshed_unchecked(dem, observer, ocell, sight))
}

fn viewshed_unchecked(dem: &ElevationGrid, observer: ObserverPoint, ocell: Cell, sight: SightParams) -> Mask {
    let o = dem.geom.to_grid([observer.x, observer.y]);
    let ho = *dem.get(ocell) + observer.height;
    Grid::from_fn(dem.geom, |cell| {
        cell == ocell || line_of_sight(dem, o, ho, cell, *dem.get(cell) + sight.target_height)
    })
}

/// Squared Euclidean distance transform along one line (lower envelope of
/// parabolas).
fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    let mut started = false;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        if !started {
            v[0] = q;
            z[0] = f64::NEG_INFINITY;
            z[1] = f64::INFINITY;
            started = true;
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0 and the new parabola dominates everywhere
                v[0] = q;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    if !started {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut j = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        while z[j + 1] < q as f64 {
            j += 1;
        }
        let p = v[j];
        *o = (q as f64 - p as f64).powi(2) + f[p];
    }
}

/// Metric distance from each cell centre to the nearest `true` cell centre.
/// Cells in the mask are at distance 0; an empty mask gives infinity.
pub fn distance_transform(mask: &Mask) -> Grid<f64> {
    let g = mask.geom;
    let (w, h) = (g.width, g.height);
    let mut d: Vec<f64> = mask.data.iter().map(|&b| if b { 0.0 } else { f64::INFINITY }).collect();
    let mut line = vec![0.0; w.max(h)];
    let mut out = vec![0.0; w.max(h)];
    for r in 0..h {
        line[..w].copy_from_slice(&d[r * w..(r + 1) * w]);
        edt_1d(&line[..w], &mut out[..w]);
        d[r * w..(r + 1) * w].copy_from_slice(&out[..w]);
    }
    for c in 0..w {
        for r in 0..h {
            line[r] = d[r * w + c];
        }
        edt_1d(&line[..h], &mut out[..h]);
        for r in 0..h {
            d[r * w + c] = out[r];
        }
    }
    Grid { geom: g, data: d.into_iter().map(|v| v.sqrt() * g.resolution).collect() }
}

/// Distance from each cell to the support boundary of `dist`: exact for
/// point observers, the 2-sigma ellipse for Gaussians, and the cell set for
/// regions.
pub fn observer_distance(geom: GridGeometry, dist: &ObserverDistribution) -> Grid<f64> {
    let mut best = Grid::filled(geom, f64::INFINITY);
    let mut mask = Grid::filled(geom, false);
    let mut any_mask = false;
    for wc in &dist.components {
        match &wc.component {
            ObserverComponent::Point { position, .. } => {
                for i in 0..geom.len() {
                    let c = geom.center(geom.cell_of(i));
                    let d = ((c[0] - position[0]).powi(2) + (c[1] - position[1]).powi(2)).sqrt();
                    best.data[i] = best.data[i].min(d);
                }
            }
            ObserverComponent::Gaussian { mean, cov, .. } => {
                let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
                let inv = [[cov[1][1] / det, -cov[0][1] / det], [-cov[1][0] / det, cov[0][0] / det]];
                let mut inside = false;
                for i in 0..geom.len() {
                    let c = geom.center(geom.cell_of(i));
                    let (dx, dy) = (c[0] - mean[0], c[1] - mean[1]);
                    let m2 = dx * (inv[0][0] * dx + inv[0][1] * dy) + dy * (inv[1][0] * dx + inv[1][1] * dy);
                    if m2 <= 4.0 {
                        mask.data[i] = true;
                        inside = true;
                    }
                }
                if !inside {
                    if let Some(cell) = geom.locate(*mean) {
                        mask.set(cell, true);
                        inside = true;
                    }
                }
                any_mask |= inside;
            }
            ObserverComponent::Region { cells, .. } => {
                for &c in cells {
                    if c.0 < geom.height && c.1 < geom.width {
                        mask.set(c, true);
                        any_mask = true;
                    }
                }
            }
        }
    }
    if any_mask {
        let dt = distance_transform(&mask);
        for (b, d) in best.data.iter_mut().zip(dt.data) {
            *b = b.min(d);
        }
    }
    best
}

/// `max(1 - d / d_max, 0)`.
pub fn distance_weight(d: f64, d_max: f64) -> f64 {
    (1.0 - d / d_max).max(0.0)
}

/// Mean of `n` sampled viewsheds times the distance weight. Samples that land
/// outside the grid are redrawn.
pub fn compute_visibility_map(
    dem: &ElevationGrid,
    dist: &ObserverDistribution,
    n: usize,
    d_max: f64,
    seed: u64,
    sight: SightParams,
) -> Result<VisibilityMap, GraphGenError> {
    check_dem(dem)?;
    dist.validate()?;
    if n == 0 {
        return Err(GraphGenError::Domain("need at least one observer sample".into()));
    }
    if !(d_max > 0.0) {
        return Err(GraphGenError::Domain("d_max must be positive".into()));
    }
    let geom = dem.geom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u32; geom.len()];
    let mut taken = 0usize;
    let mut attempts = 0usize;
    while taken < n {
        attempts += 1;
        if attempts > 1000 * n + 1000 {
            return Err(GraphGenError::Domain("observer samples keep landing outside the grid".into()));
        }
        let obs = dist.sample(&geom, &mut rng);
        let Some(ocell) = geom.locate([obs.x, obs.y]) else { continue };
        let vs = viewshed_unchecked(dem, obs, ocell, sight);
        for (c, &v) in counts.iter_mut().zip(&vs.data) {
            *c += v as u32;
        }
        taken += 1;
    }
    let d = observer_distance(geom, dist);
    let data = counts.iter().zip(&d.data).map(|(&k, &di)| (k as f64 / n as f64) * distance_weight(di, d_max)).collect();
    Ok(Grid { geom, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(w: usize, h: usize) -> ElevationGrid {
        Grid::filled(GridGeometry::new(w, h, 1.0), 0.0)
    }

    #[test]
    fn flat_terrain_sees_everything() {
        let v = compute_viewshed(&flat(15, 11), ObserverPoint { x: 3.5, y: 4.5, height: 1.7 }, SightParams::default())
            .unwrap();
        assert!(v.data.iter().all(|&b| b));
    }

    #[test]
    fn wall_casts_a_shadow() {
        let mut dem = flat(20, 9);
        for r in 0..9 {
            dem.set((r, 10), 1e6);
        }
        let v = compute_viewshed(&dem, ObserverPoint { x: 2.5, y: 4.5, height: 1.7 }, SightParams::default()).unwrap();
        for r in 0..9 {
            for c in 0..20 {
                if c > 10 {
                    assert!(!*v.get((r, c)), "({r},{c}) should be hidden");
                } else if c < 10 {
                    assert!(*v.get((r, c)), "({r},{c}) should be visible");
                }
            }
        }
    }

    #[test]
    fn observer_outside_grid_is_rejected() {
        let r = compute_viewshed(&flat(4, 4), ObserverPoint { x: 9.0, y: 1.0, height: 1.0 }, SightParams::default());
        assert!(matches!(r, Err(GraphGenError::Domain(_))));
    }

    /// Dense ray march with bilinear terrain, independent of the
    /// crossing-based test.
    fn oracle(dem: &ElevationGrid, o: ObserverPoint, target: Cell, th: f64) -> bool {
        let g = dem.geom;
        let bil = |x: f64, y: f64| {
            let (tx, ty) = (x - 0.5, y - 0.5);
            let c0 = tx.floor().clamp(0.0, (g.width - 1) as f64) as usize;
            let r0 = ty.floor().clamp(0.0, (g.height - 1) as f64) as usize;
            let (c1, r1) = ((c0 + 1).min(g.width - 1), (r0 + 1).min(g.height - 1));
            let (fx, fy) = ((tx - c0 as f64).clamp(0.0, 1.0), (ty - r0 as f64).clamp(0.0, 1.0));
            let a = dem.get((r0, c0)) * (1.0 - fx) + dem.get((r0, c1)) * fx;
            let b = dem.get((r1, c0)) * (1.0 - fx) + dem.get((r1, c1)) * fx;
            a * (1.0 - fy) + b * fy
        };
        let oc = g.locate([o.x, o.y]).unwrap();
        let ho = dem.get(oc) + o.height;
        let t = [target.1 as f64 + 0.5, target.0 as f64 + 0.5];
        let ht = dem.get(target) + th;
        let steps = 400;
        (1..steps).all(|k| {
            let s = k as f64 / steps as f64;
            bil(o.x + s * (t[0] - o.x), o.y + s * (t[1] - o.y)) <= ho + s * (ht - ho) + 1e-9
        })
    }

    #[test]
    fn peak_hides_far_slope() {
        let g = GridGeometry::new(41, 41, 1.0);
        let dem = Grid::from_fn(g, |(r, c)| {
            let d = ((r as f64 - 20.0).powi(2) + (c as f64 - 20.0).powi(2)).sqrt();
            (15.0 - d).max(0.0) * 2.0
        });
        let obs = ObserverPoint { x: 2.5, y: 20.5, height: 1.7 };
        let sight = SightParams::default();
        let v = compute_viewshed(&dem, obs, sight).unwrap();
        // near slope faces the observer
        assert!(*v.get((20, 10)));
        // directly behind the summit
        assert!(!*v.get((20, 30)));
        let agree = (0..g.len()).filter(|&i| v.data[i] == oracle(&dem, obs, g.cell_of(i), sight.target_height)).count();
        assert!(agree as f64 >= 0.97 * g.len() as f64, "agreement {agree}/{}", g.len());
    }

    #[test]
    fn point_observer_follows_distance_weight() {
        let dem = flat(41, 3);
        let dist = ObserverDistribution::point(0.5, 1.5, 1.7);
        let vis = compute_visibility_map(&dem, &dist, 1000, 20.0, 7, SightParams::default()).unwrap();
        assert!((vis.get((1, 10)) - 0.5).abs() < 1e-12);
        assert_eq!(*vis.get((1, 20)), 0.0);
        assert_eq!(*vis.get((1, 35)), 0.0);
        for c in 1..41 {
            assert!(vis.get((1, c)) <= vis.get((1, c - 1)));
        }
    }

    #[test]
    fn single_sample_equals_weighted_viewshed() {
        let mut dem = flat(12, 12);
        dem.set((5, 6), 30.0);
        let dist = ObserverDistribution::point(2.5, 5.5, 1.0);
        let vis = compute_visibility_map(&dem, &dist, 1, 9.0, 1, SightParams::default()).unwrap();
        let vs = compute_viewshed(&dem, ObserverPoint { x: 2.5, y: 5.5, height: 1.0 }, SightParams::default()).unwrap();
        let d = observer_distance(dem.geom, &dist);
        for i in 0..dem.geom.len() {
            let want = if vs.data[i] { distance_weight(d.data[i], 9.0) } else { 0.0 };
            assert_eq!(vis.data[i], want);
        }
    }

    #[test]
    fn degenerate_covariance_is_rejected() {
        let dist = ObserverDistribution::gaussian([3.0, 3.0], [[1.0, 1.0], [1.0, 1.0]], 1.0);
        let r = compute_visibility_map(&flat(6, 6), &dist, 4, 5.0, 0, SightParams::default());
        assert!(matches!(r, Err(GraphGenError::Domain(_))));
    }

    #[test]
    fn gaussian_map_is_deterministic_and_bounded() {
        let dist = ObserverDistribution::gaussian([6.0, 6.0], [[2.0, 0.5], [0.5, 1.0]], 1.7);
        let mut dem = flat(14, 14);
        dem.set((3, 3), 5.0);
        let a = compute_visibility_map(&dem, &dist, 20, 8.0, 42, SightParams::default()).unwrap();
        let b = compute_visibility_map(&dem, &dist, 20, 8.0, 42, SightParams::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
        // mean lies inside the 2-sigma ellipse
        assert_eq!(*a.get((5, 5)), 1.0);
    }

    #[test]
    fn edt_matches_brute_force() {
        let g = GridGeometry::new(9, 7, 0.5);
        let mask = Grid::from_fn(g, |(r, c)| (r * 7 + c * 3) % 11 == 0);
        let dt = distance_transform(&mask);
        let pts: Vec<Cell> = (0..g.len()).map(|i| g.cell_of(i)).filter(|&c| *mask.get(c)).collect();
        for i in 0..g.len() {
            let (r, c) = g.cell_of(i);
            let want = pts
                .iter()
                .map(|&(pr, pc)| ((r as f64 - pr as f64).powi(2) + (c as f64 - pc as f64).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
                * 0.5;
            assert!((dt.data[i] - want).abs() < 1e-12, "{i}: {} vs {want}", dt.data[i]);
        }
    }
}
