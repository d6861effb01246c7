//! Cover mask, connected cover regions, size-bounded splitting and node placement.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::raster::{Cell, Grid, GridGeometry, Mask, VisibilityMap};
use super::GraphGenError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverRegion {
    pub id: usize,
    /// Sorted by (row, col).
    pub cells: Vec<Cell>,
    /// Mean (row, col) of the cells, in cell units.
    pub centroid: [f64; 2],
    pub node: Cell,
}

impl CoverRegion {
    pub fn from_cells(id: usize, mut cells: Vec<Cell>) -> Self {
        cells.sort_unstable();
        cells.dedup();
        let n = cells.len().max(1) as f64;
        let (sr, sc) = cells.iter().fold((0.0, 0.0), |(a, b), &(r, c)| (a + r as f64, b + c as f64));
        let centroid = [sr / n, sc / n];
        let node = nearest_to_centroid(&cells, centroid);
        Self { id, cells, centroid, node }
    }

    pub fn area(&self) -> usize {
        self.cells.len()
    }

    pub fn contains(&self, cell: Cell) -> bool {
        self.cells.binary_search(&cell).is_ok()
    }
}

fn nearest_to_centroid(cells: &[Cell], centroid: [f64; 2]) -> Cell {
    let mut best = cells.first().copied().unwrap_or((0, 0));
    let mut best_d = f64::INFINITY;
    // cells are sorted, so strict improvement keeps the (row, col) tie-break
    for &(r, c) in cells {
        let d = (r as f64 - centroid[0]).powi(2) + (c as f64 - centroid[1]).powi(2);
        if d < best_d {
            best_d = d;
            best = (r, c);
        }
    }
    best
}

/// Cells with visibility strictly below `nu` that are not obstacles.
pub fn get_cover_mask(vis: &VisibilityMap, nu: f64, obstacles: &Mask) -> Result<Mask, GraphGenError> {
    if !vis.same_shape(obstacles) {
        return Err(GraphGenError::Domain("visibility and obstacle grids differ in shape".into()));
    }
    Ok(Grid { geom: vis.geom, data: vis.data.iter().zip(&obstacles.data).map(|(&p, &o)| p < nu && !o).collect() })
}

/// 8-connected components of the `true` cells listed in `cells`, in order of
/// their first cell.
fn components(geom: &GridGeometry, cells: &[Cell]) -> Vec<Vec<Cell>> {
    let mut member = vec![false; geom.len()];
    for &c in cells {
        member[geom.index(c)] = true;
    }
    let mut sorted = cells.to_vec();
    sorted.sort_unstable();
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in sorted {
        if !member[geom.index(start)] {
            continue;
        }
        member[geom.index(start)] = false;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(c) = queue.pop_front() {
            comp.push(c);
            for nb in geom.neighbors8(c) {
                let i = geom.index(nb);
                if member[i] {
                    member[i] = false;
                    queue.push_back(nb);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// 8-connected components of `mask` with more than `xi_min` cells.
pub fn get_cover_regions(mask: &Mask, xi_min: usize) -> Vec<CoverRegion> {
    let cells: Vec<Cell> = (0..mask.geom.len()).filter(|&i| mask.data[i]).map(|i| mask.geom.cell_of(i)).collect();
    components(&mask.geom, &cells)
        .into_iter()
        .filter(|c| c.len() > xi_min)
        .enumerate()
        .map(|(id, c)| CoverRegion::from_cells(id, c))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    /// Cut between columns.
    Col,
    /// Cut between rows.
    Row,
}

#[derive(Debug, Clone, Copy)]
struct Cut {
    axis: Axis,
    /// The piece is every cell with coordinate `<= at` (low side) or `>= at`.
    at: usize,
    low_side: bool,
    area: usize,
    length: usize,
    /// False when even the first strip exceeds the size limit.
    fits: bool,
}

fn coord(axis: Axis, (r, c): Cell) -> usize {
    match axis {
        Axis::Col => c,
        Axis::Row => r,
    }
}

fn cross_key(axis: Axis, (r, c): Cell) -> usize {
    match axis {
        Axis::Col => r,
        Axis::Row => c,
    }
}

/// Largest strip-aligned piece from one side with at most `xi_max` cells, or
/// the first strip when even that is too large.
fn best_cut(cells: &[Cell], axis: Axis, low_side: bool, xi_max: usize) -> Option<Cut> {
    let lo = cells.iter().map(|&c| coord(axis, c)).min()?;
    let hi = cells.iter().map(|&c| coord(axis, c)).max()?;
    if lo == hi {
        return None;
    }
    let mut strip = vec![Vec::new(); hi - lo + 1];
    for &c in cells {
        strip[coord(axis, c) - lo].push(cross_key(axis, c));
    }
    for s in &mut strip {
        s.sort_unstable();
    }
    let order: Vec<usize> = if low_side { (0..strip.len()).collect() } else { (0..strip.len()).rev().collect() };
    let mut area = 0usize;
    let mut last = None;
    for (k, &s) in order.iter().enumerate().take(order.len() - 1) {
        if area + strip[s].len() > xi_max {
            break;
        }
        area += strip[s].len();
        last = Some(k);
    }
    let fits = last.is_some() && area > 0;
    let k = last.unwrap_or(0);
    if !fits {
        area = strip[order[0]].len();
    }
    let (a, b) = (&strip[order[k]], &strip[order[k + 1]]);
    // seam: cells of the last strip with a direct neighbour across the cut
    let length = a.iter().filter(|x| b.binary_search(x).is_ok()).count();
    Some(Cut { axis, at: order[k] + lo, low_side, area, length, fits })
}

fn choose_cut(cells: &[Cell], xi_max: usize) -> Option<Cut> {
    let mut cands = Vec::new();
    for axis in [Axis::Col, Axis::Row] {
        for low in [true, false] {
            cands.extend(best_cut(cells, axis, low, xi_max));
        }
    }
    let fitting = cands.iter().copied().filter(|c| c.fits);
    // shortest cut, then larger piece, then candidate order
    let best = fitting.reduce(|a, b| if (b.length, a.area) < (a.length, b.area) { b } else { a });
    // no strip fits: peel the smallest first strip
    best.or_else(|| cands.into_iter().reduce(|a, b| if b.area < a.area { b } else { a }))
}

/// Repeatedly cuts regions larger than `xi_max` with axis-aligned straight
/// cuts until every piece fits. Each side of a cut is re-split into its
/// 8-connected components. Ids are renumbered in output order.
pub fn split_regions(
    geom: &GridGeometry,
    regions: Vec<CoverRegion>,
    xi_max: usize,
) -> Result<Vec<CoverRegion>, GraphGenError> {
    if xi_max == 0 {
        return Err(GraphGenError::Domain("maximum region size must be at least one cell".into()));
    }
    let mut done: Vec<Vec<Cell>> = Vec::new();
    let mut work: VecDeque<Vec<Cell>> = regions.into_iter().map(|r| r.cells).collect();
    while let Some(cells) = work.pop_front() {
        if cells.len() <= xi_max {
            done.push(cells);
            continue;
        }
        let cut = choose_cut(&cells, xi_max).expect("a region with two or more cells has a cut");
        let (piece, rest): (Vec<Cell>, Vec<Cell>) = cells.into_iter().partition(|&c| {
            let v = coord(cut.axis, c);
            if cut.low_side {
                v <= cut.at
            } else {
                v >= cut.at
            }
        });
        for side in [piece, rest] {
            for comp in components(geom, &side) {
                if comp.len() <= xi_max {
                    done.push(comp);
                } else {
                    work.push_back(comp);
                }
            }
        }
    }
    Ok(done.into_iter().enumerate().map(|(id, c)| CoverRegion::from_cells(id, c)).collect())
}

/// One node per region: the region cell nearest its centroid, ties broken by
/// (row, col). Obstacle cells are skipped.
pub fn place_nodes(obstacles: &Mask, regions: &[CoverRegion]) -> Result<Vec<Cell>, GraphGenError> {
    regions
        .iter()
        .map(|r| {
            let free: Vec<Cell> = r.cells.iter().copied().filter(|&c| !*obstacles.get(c)).collect();
            if free.is_empty() {
                return Err(GraphGenError::Domain(format!("region {} has no free cell", r.id)));
            }
            Ok(nearest_to_centroid(&free, r.centroid))
        })
        .collect()
}

/// Grid of region index (+1) per cell; 0 outside all regions.
pub fn label_grid(geom: GridGeometry, regions: &[CoverRegion]) -> Grid<u32> {
    let mut g = Grid::filled(geom, 0u32);
    for (i, r) in regions.iter().enumerate() {
        for &c in &r.cells {
            g.set(c, i as u32 + 1);
        }
    }
    g
}

/// Checks pairwise disjointness and connectivity.
pub fn check_regions(geom: &GridGeometry, regions: &[CoverRegion]) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    for r in regions {
        for &c in &r.cells {
            if !seen.insert(c) {
                return Err(format!("cell {c:?} is in two regions"));
            }
        }
        if components(geom, &r.cells).len() != 1 {
            return Err(format!("region {} is not connected", r.id));
        }
    }
    Ok(())
}
