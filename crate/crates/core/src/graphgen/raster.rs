//! Co-registered raster grids and their file formats.
//!
//! Row 0 is the southern edge: cell `(row, col)` has its centre at
//! `origin + resolution * (col + 0.5, row + 0.5)`. ESRI ASCII files list the
//! northern row first, so rows are flipped on read and write.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `(row, col)` index into a grid.
pub type Cell = (usize, usize);

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("sidecar: {0}")]
    Sidecar(#[from] serde_json::Error),
    #[error("{0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    /// Metres per cell.
    pub resolution: f64,
    /// World coordinates of the south-west corner.
    pub origin: [f64; 2],
}

impl GridGeometry {
    pub fn new(width: usize, height: usize, resolution: f64) -> Self {
        Self { width, height, resolution, origin: [0.0, 0.0] }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, (r, c): Cell) -> usize {
        r * self.width + c
    }

    pub fn cell_of(&self, i: usize) -> Cell {
        (i / self.width, i % self.width)
    }

    pub fn center(&self, (r, c): Cell) -> [f64; 2] {
        [self.origin[0] + (c as f64 + 0.5) * self.resolution, self.origin[1] + (r as f64 + 0.5) * self.resolution]
    }

    /// Cell containing a world point, if inside the grid.
    pub fn locate(&self, p: [f64; 2]) -> Option<Cell> {
        let fx = (p[0] - self.origin[0]) / self.resolution;
        let fy = (p[1] - self.origin[1]) / self.resolution;
        if fx < 0.0 || fy < 0.0 || !fx.is_finite() || !fy.is_finite() {
            return None;
        }
        let (c, r) = (fx as usize, fy as usize);
        (c < self.width && r < self.height).then_some((r, c))
    }

    /// Continuous grid coordinates `(col, row)` in cell units, with cell
    /// centres at integer + 0.5.
    pub fn to_grid(&self, p: [f64; 2]) -> [f64; 2] {
        [(p[0] - self.origin[0]) / self.resolution, (p[1] - self.origin[1]) / self.resolution]
    }

    /// The up to eight neighbours of `cell`, in a fixed order.
    pub fn neighbors8(&self, (r, c): Cell) -> impl Iterator<Item = Cell> + '_ {
        const D: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
        D.iter().filter_map(move |&(dr, dc)| {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            (nr >= 0 && nc >= 0 && (nr as usize) < self.height && (nc as usize) < self.width)
                .then_some((nr as usize, nc as usize))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    pub geom: GridGeometry,
    pub data: Vec<T>,
}

pub type ElevationGrid = Grid<f64>;
pub type VisibilityMap = Grid<f64>;
pub type Mask = Grid<bool>;

impl<T: Clone> Grid<T> {
    pub fn filled(geom: GridGeometry, v: T) -> Self {
        Self { geom, data: vec![v; geom.len()] }
    }
}

impl<T> Grid<T> {
    pub fn from_fn(geom: GridGeometry, mut f: impl FnMut(Cell) -> T) -> Self {
        let data = (0..geom.len()).map(|i| f(geom.cell_of(i))).collect();
        Self { geom, data }
    }

    pub fn get(&self, cell: Cell) -> &T {
        &self.data[self.geom.index(cell)]
    }

    pub fn set(&mut self, cell: Cell, v: T) {
        let i = self.geom.index(cell);
        self.data[i] = v;
    }

    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.geom.width == other.geom.width && self.geom.height == other.geom.height
    }
}

impl Grid<f64> {
    /// Nonzero cells become `true`.
    pub fn to_mask(&self) -> Mask {
        Grid { geom: self.geom, data: self.data.iter().map(|&v| v != 0.0).collect() }
    }
}

impl Mask {
    pub fn to_f64(&self) -> Grid<f64> {
        Grid { geom: self.geom, data: self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect() }
    }
}

/// Parses an ESRI ASCII grid. `NODATA_value` cells become NaN.
pub fn parse_ascii_grid(text: &str) -> Result<Grid<f64>, RasterError> {
    let mut ncols = None;
    let mut nrows = None;
    let mut cellsize = None;
    let mut x0 = 0.0;
    let mut y0 = 0.0;
    let mut centered = false;
    let mut nodata: Option<f64> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| RasterError::Parse { line: i + 1, msg };
        let first = line.split_whitespace().next().unwrap();
        if first.chars().next().is_some_and(|ch| ch.is_ascii_alphabetic()) {
            let mut it = line.split_whitespace();
            let key = it.next().unwrap().to_ascii_lowercase();
            let val: f64 = it
                .next()
                .ok_or_else(|| err(format!("missing value for {key}")))?
                .parse()
                .map_err(|_| err(format!("bad value for {key}")))?;
            match key.as_str() {
                "ncols" => ncols = Some(val as usize),
                "nrows" => nrows = Some(val as usize),
                "cellsize" => cellsize = Some(val),
                "xllcorner" => x0 = val,
                "yllcorner" => y0 = val,
                "xllcenter" => {
                    x0 = val;
                    centered = true;
                }
                "yllcenter" => {
                    y0 = val;
                    centered = true;
                }
                "nodata_value" => nodata = Some(val),
                _ => return Err(err(format!("unknown header key {key}"))),
            }
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split_whitespace().map(|t| t.parse::<f64>()).collect();
        let vals = vals.map_err(|_| err("bad number in data row".into()))?;
        rows.push(vals);
    }
    let (Some(w), Some(h), Some(res)) = (ncols, nrows, cellsize) else {
        return Err(RasterError::Shape("header needs ncols, nrows and cellsize".into()));
    };
    if !(res > 0.0) {
        return Err(RasterError::Shape("cellsize must be positive".into()));
    }
    // values may wrap across lines; only the total count matters
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    if flat.len() != w * h {
        return Err(RasterError::Shape(format!("expected {} values, found {}", w * h, flat.len())));
    }
    if centered {
        x0 -= res / 2.0;
        y0 -= res / 2.0;
    }
    let geom = GridGeometry { width: w, height: h, resolution: res, origin: [x0, y0] };
    let mut data = vec![0.0; w * h];
    for (k, v) in flat.into_iter().enumerate() {
        let (file_row, c) = (k / w, k % w);
        let r = h - 1 - file_row;
        data[r * w + c] = if nodata == Some(v) { f64::NAN } else { v };
    }
    Ok(Grid { geom, data })
}

pub fn format_ascii_grid(grid: &Grid<f64>) -> String {
    let g = grid.geom;
    let mut out = String::new();
    let _ = writeln!(out, "ncols {}", g.width);
    let _ = writeln!(out, "nrows {}", g.height);
    let _ = writeln!(out, "xllcorner {}", g.origin[0]);
    let _ = writeln!(out, "yllcorner {}", g.origin[1]);
    let _ = writeln!(out, "cellsize {}", g.resolution);
    let has_nan = grid.data.iter().any(|v| v.is_nan());
    if has_nan {
        out.push_str("NODATA_value -9999\n");
    }
    for r in (0..g.height).rev() {
        let row: Vec<String> = (0..g.width)
            .map(|c| {
                let v = *grid.get((r, c));
                if v.is_nan() {
                    "-9999".to_string()
                } else {
                    format!("{v}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

/// JSON sidecar describing a raw little-endian float32 raster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSidecar {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: [f64; 2],
    pub dtype: String,
    pub byte_order: String,
    /// Row 0 of the raw data is the southern row.
    pub row_order: String,
}

pub fn encode_f32(grid: &Grid<f64>) -> (Vec<u8>, RawSidecar) {
    let mut bytes = Vec::with_capacity(grid.data.len() * 4);
    for &v in &grid.data {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let g = grid.geom;
    let side = RawSidecar {
        width: g.width,
        height: g.height,
        resolution: g.resolution,
        origin: g.origin,
        dtype: "float32".into(),
        byte_order: "little".into(),
        row_order: "south_first".into(),
    };
    (bytes, side)
}

pub fn decode_f32(bytes: &[u8], side: &RawSidecar) -> Result<Grid<f64>, RasterError> {
    if side.dtype != "float32" || side.byte_order != "little" {
        return Err(RasterError::Shape(format!("unsupported raster {} / {}", side.dtype, side.byte_order)));
    }
    let n = side.width * side.height;
    if bytes.len() != 4 * n {
        return Err(RasterError::Shape(format!("expected {} bytes, found {}", 4 * n, bytes.len())));
    }
    let mut data: Vec<f64> =
        bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64).collect();
    if side.row_order == "north_first" {
        let w = side.width;
        let flipped: Vec<f64> = (0..side.height).rev().flat_map(|r| data[r * w..(r + 1) * w].to_vec()).collect();
        data = flipped;
    }
    let geom =
        GridGeometry { width: side.width, height: side.height, resolution: side.resolution, origin: side.origin };
    Ok(Grid { geom, data })
}

/// Writes `path` (raw float32) and `path.json` (sidecar).
pub fn write_f32(path: &Path, grid: &Grid<f64>) -> Result<(), RasterError> {
    let (bytes, side) = encode_f32(grid);
    std::fs::write(path, bytes)?;
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

pub fn read_f32(path: &Path) -> Result<Grid<f64>, RasterError> {
    let side: RawSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    decode_f32(&std::fs::read(path)?, &side)
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// Reads either format: `.asc` files as ESRI ASCII, anything else as raw
/// float32 with a sidecar.
pub fn read_grid(path: &Path) -> Result<Grid<f64>, RasterError> {
    if path.extension().is_some_and(|e| e == "asc") {
        parse_ascii_grid(&std::fs::read_to_string(path)?)
    } else {
        read_f32(path)
    }
}

pub fn write_grid(path: &Path, grid: &Grid<f64>) -> Result<(), RasterError> {
    if path.extension().is_some_and(|e| e == "asc") {
        std::fs::write(path, format_ascii_grid(grid))?;
        Ok(())
    } else {
        write_f32(path, grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_round_trip_flips_rows() {
        let text = "ncols 3\nnrows 2\nxllcorner 10\nyllcorner 20\ncellsize 2\n1 2 3\n4 5 6\n";
        let g = parse_ascii_grid(text).unwrap();
        // last file row is the southern row
        assert_eq!(*g.get((0, 0)), 4.0);
        assert_eq!(*g.get((1, 2)), 3.0);
        assert_eq!(g.geom.center((0, 0)), [11.0, 21.0]);
        assert_eq!(parse_ascii_grid(&format_ascii_grid(&g)).unwrap(), g);
    }

    #[test]
    fn ascii_nodata_and_errors() {
        let g = parse_ascii_grid("ncols 2\nnrows 1\ncellsize 1\nNODATA_value -1\n-1 3\n").unwrap();
        assert!(g.data[0].is_nan());
        assert!(matches!(parse_ascii_grid("ncols 2\nnrows 2\ncellsize 1\n1 2 3\n"), Err(RasterError::Shape(_))));
        assert!(matches!(
            parse_ascii_grid("ncols 2\nnrows 1\ncellsize 1\n1 x\n"),
            Err(RasterError::Parse { line: 4, .. })
        ));
    }

    #[test]
    fn f32_round_trip() {
        let g = Grid::from_fn(GridGeometry::new(4, 3, 0.5), |(r, c)| (r * 10 + c) as f64 * 0.25);
        let (b, s) = encode_f32(&g);
        assert_eq!(decode_f32(&b, &s).unwrap(), g);
        let dir = std::env::temp_dir().join(format!("ow_raster_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("g.f32");
        write_grid(&p, &g).unwrap();
        assert_eq!(read_grid(&p).unwrap(), g);
    }

    #[test]
    fn locate_and_neighbors() {
        let geom = GridGeometry { width: 3, height: 3, resolution: 2.0, origin: [-3.0, -3.0] };
        assert_eq!(geom.locate([0.0, 0.0]), Some((1, 1)));
        assert_eq!(geom.locate([3.5, 0.0]), None);
        assert_eq!(geom.neighbors8((0, 0)).count(), 3);
        assert_eq!(geom.neighbors8((1, 1)).count(), 8);
    }
}
