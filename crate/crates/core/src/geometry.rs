//! Binary building grids and the geometric primitives derived from them:
//! edge cells, corner (vertex) cells and line-of-sight obstruction profiles.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer cell index on an N×N grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridPoint {
    pub row: usize,
    pub col: usize,
}

impl GridPoint {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Center-to-center Euclidean distance in cells.
    pub fn distance(self, other: GridPoint) -> f64 {
        let dr = self.row as f64 - other.row as f64;
        let dc = self.col as f64 - other.col as f64;
        dr.hypot(dc)
    }

    fn as_index(self) -> [usize; 2] {
        [self.row, self.col]
    }
}

impl From<(usize, usize)> for GridPoint {
    fn from((row, col): (usize, usize)) -> Self {
        Self { row, col }
    }
}

/// Building occupancy plus the restricted / sensing partition of the plane.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvironmentGrid {
    /// `true` = building.
    pub occupancy: Array2<bool>,
    /// Meters per cell.
    pub cell_size: f64,
    pub building_height: f64,
    pub antenna_height: f64,
    /// Cells where the emitter may be (no sensors allowed).
    pub restricted: Array2<bool>,
    /// Cells where sensors may be placed.
    pub sensing: Array2<bool>,
}

pub const DEFAULT_BUILDING_HEIGHT: f64 = 25.0;
pub const DEFAULT_ANTENNA_HEIGHT: f64 = 1.5;

impl EnvironmentGrid {
    /// Square grid with the default split: lower half restricted, upper half
    /// sensing.
    pub fn new(
        occupancy: Array2<bool>,
        cell_size: f64,
        building_height: f64,
        antenna_height: f64,
    ) -> Result<Self> {
        let (rows, cols) = occupancy.dim();
        let restricted = Array2::from_shape_fn((rows, cols), |(r, _)| r >= rows / 2);
        let sensing = restricted.mapv(|v| !v);
        let env = Self {
            occupancy,
            cell_size,
            building_height,
            antenna_height,
            restricted,
            sensing,
        };
        env.validate()?;
        Ok(env)
    }

    /// Grid with the default 1 m cells and 25 m / 1.5 m heights.
    pub fn with_defaults(occupancy: Array2<bool>) -> Result<Self> {
        Self::new(
            occupancy,
            1.0,
            DEFAULT_BUILDING_HEIGHT,
            DEFAULT_ANTENNA_HEIGHT,
        )
    }

    /// Empty `n`×`n` grid with default parameters.
    pub fn open(n: usize) -> Self {
        Self::with_defaults(Array2::from_elem((n, n), false)).expect("open grid is valid")
    }

    /// Replace the restricted region; sensing becomes its complement.
    pub fn with_restricted(mut self, restricted: Array2<bool>) -> Result<Self> {
        if restricted.dim() != self.occupancy.dim() {
            return Err(Error::ShapeMismatch {
                expected: self.occupancy.dim(),
                actual: restricted.dim(),
            });
        }
        self.sensing = restricted.mapv(|v| !v);
        self.restricted = restricted;
        self.validate()?;
        Ok(self)
    }

    /// Restricted region = rows in `start..end`.
    pub fn with_restricted_rows(self, start: usize, end: usize) -> Result<Self> {
        let (rows, cols) = self.occupancy.dim();
        let mask = Array2::from_shape_fn((rows, cols), |(r, _)| r >= start && r < end);
        self.with_restricted(mask)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.occupancy.dim();
        if dim.0 == 0 || dim.1 == 0 {
            return Err(Error::InvalidEnvironment("empty grid".into()));
        }
        if self.restricted.dim() != dim || self.sensing.dim() != dim {
            return Err(Error::InvalidEnvironment(
                "region masks do not match the occupancy shape".into(),
            ));
        }
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(Error::InvalidEnvironment(format!(
                "cell_size must be positive, got {}",
                self.cell_size
            )));
        }
        if !(self.antenna_height >= 0.0 && self.building_height > self.antenna_height) {
            return Err(Error::InvalidEnvironment(format!(
                "need building_height > antenna_height >= 0, got {} and {}",
                self.building_height, self.antenna_height
            )));
        }
        for ((idx, &occ), (&r, &s)) in self
            .occupancy
            .indexed_iter()
            .zip(self.restricted.iter().zip(self.sensing.iter()))
        {
            if r && s {
                return Err(Error::InvalidEnvironment(format!(
                    "cell {idx:?} is both restricted and sensing"
                )));
            }
            if !occ && !r && !s {
                return Err(Error::InvalidEnvironment(format!(
                    "free cell {idx:?} is in neither region"
                )));
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.occupancy.nrows()
    }

    pub fn cols(&self) -> usize {
        self.occupancy.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.occupancy.dim()
    }

    pub fn contains(&self, p: GridPoint) -> bool {
        p.row < self.rows() && p.col < self.cols()
    }

    pub fn check_bounds(&self, p: GridPoint) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                row: p.row,
                col: p.col,
                rows: self.rows(),
                cols: self.cols(),
            })
        }
    }

    pub fn is_building(&self, p: GridPoint) -> bool {
        self.occupancy[p.as_index()]
    }

    pub fn is_free(&self, p: GridPoint) -> bool {
        !self.is_building(p)
    }

    pub fn is_sensing(&self, p: GridPoint) -> bool {
        self.sensing[p.as_index()]
    }

    pub fn is_restricted(&self, p: GridPoint) -> bool {
        self.restricted[p.as_index()]
    }

    pub fn free_cell_count(&self) -> usize {
        self.occupancy.iter().filter(|&&b| !b).count()
    }

    /// Free cells of the sensing region in row-major order.
    pub fn free_sensing_cells(&self) -> Vec<GridPoint> {
        self.cells_where(|p| self.is_free(p) && self.is_sensing(p))
    }

    /// Free cells of the restricted region in row-major order.
    pub fn free_restricted_cells(&self) -> Vec<GridPoint> {
        self.cells_where(|p| self.is_free(p) && self.is_restricted(p))
    }

    fn cells_where(&self, pred: impl Fn(GridPoint) -> bool) -> Vec<GridPoint> {
        let (rows, cols) = self.dim();
        (0..rows)
            .flat_map(|r| (0..cols).map(move |c| GridPoint::new(r, c)))
            .filter(|&p| pred(p))
            .collect()
    }

    /// Height of every building above the antenna plane.
    pub fn blocking_height(&self) -> f64 {
        self.building_height - self.antenna_height
    }
}

/// Free cells that share a side with at least one building cell.
pub fn extract_edges(env: &EnvironmentGrid) -> BTreeSet<GridPoint> {
    let (rows, cols) = env.dim();
    let occ = &env.occupancy;
    let mut out = BTreeSet::new();
    for r in 0..rows {
        for c in 0..cols {
            if occ[[r, c]] {
                continue;
            }
            let touches = (r > 0 && occ[[r - 1, c]])
                || (r + 1 < rows && occ[[r + 1, c]])
                || (c > 0 && occ[[r, c - 1]])
                || (c + 1 < cols && occ[[r, c + 1]]);
            if touches {
                out.insert(GridPoint::new(r, c));
            }
        }
    }
    out
}

/// Free cells at building corners, found by scanning every 2×2 window.
///
/// One occupied cell in a window is a convex corner: the free cell diagonally
/// opposite is marked. Three occupied cells form a concave corner: the single
/// free cell is marked.
pub fn extract_vertices(env: &EnvironmentGrid) -> BTreeSet<GridPoint> {
    let (rows, cols) = env.dim();
    let occ = &env.occupancy;
    let mut out = BTreeSet::new();
    if rows < 2 || cols < 2 {
        return out;
    }
    for r in 0..rows - 1 {
        for c in 0..cols - 1 {
            let cells = [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)];
            let count = cells.iter().filter(|&&(i, j)| occ[[i, j]]).count();
            match count {
                1 => {
                    // Diagonal partner of cell k in the window is cell 3 - k.
                    let k = cells.iter().position(|&(i, j)| occ[[i, j]]).unwrap();
                    let (i, j) = cells[3 - k];
                    out.insert(GridPoint::new(i, j));
                }
                3 => {
                    let (i, j) = *cells.iter().find(|&&(i, j)| !occ[[i, j]]).unwrap();
                    out.insert(GridPoint::new(i, j));
                }
                _ => {}
            }
        }
    }
    out
}

/// A run of consecutive building cells crossed by a tx→rx path.
#[derive(Clone, Debug, PartialEq)]
pub struct ObstructionSegment {
    /// First building cell met walking from the transmitter.
    pub entry: GridPoint,
    /// Last building cell of the run.
    pub exit: GridPoint,
    /// Height of the obstruction above the straight tx→rx line (meters).
    pub blocking_height: f64,
    /// Distance from the transmitter to the segment's mid-point (meters).
    pub d1: f64,
    /// Distance from the segment's mid-point to the receiver (meters).
    pub d2: f64,
    /// Number of building cells in the run.
    pub cells: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObstructionProfile {
    /// Ordered by distance from the transmitter.
    pub segments: Vec<ObstructionSegment>,
    pub total_crossed_cells: usize,
    /// tx→rx distance in meters.
    pub path_length: f64,
}

impl ObstructionProfile {
    pub fn is_clear(&self) -> bool {
        self.segments.is_empty()
    }
}

/// Every cell touched by the segment joining the centers of `a` and `b`,
/// including both neighbors when the segment passes exactly through a cell
/// corner. Integer error terms, so the result is exact.
pub fn supercover(a: GridPoint, b: GridPoint) -> Vec<GridPoint> {
    let (mut y, mut x) = (a.row as i64, a.col as i64);
    let (y2, x2) = (b.row as i64, b.col as i64);
    let mut out = vec![a];
    let mut dy = y2 - y;
    let mut dx = x2 - x;
    let ystep = if dy < 0 {
        dy = -dy;
        -1
    } else {
        1
    };
    let xstep = if dx < 0 {
        dx = -dx;
        -1
    } else {
        1
    };
    let ddy = 2 * dy;
    let ddx = 2 * dx;
    let push = |out: &mut Vec<GridPoint>, r: i64, c: i64| {
        out.push(GridPoint::new(r as usize, c as usize));
    };
    if ddx >= ddy {
        let mut error = dx;
        let mut errorprev = dx;
        for _ in 0..dx {
            x += xstep;
            error += ddy;
            if error > ddx {
                y += ystep;
                error -= ddx;
                match (error + errorprev).cmp(&ddx) {
                    std::cmp::Ordering::Less => push(&mut out, y - ystep, x),
                    std::cmp::Ordering::Greater => push(&mut out, y, x - xstep),
                    std::cmp::Ordering::Equal => {
                        push(&mut out, y - ystep, x);
                        push(&mut out, y, x - xstep);
                    }
                }
            }
            push(&mut out, y, x);
            errorprev = error;
        }
    } else {
        let mut error = dy;
        let mut errorprev = dy;
        for _ in 0..dy {
            y += ystep;
            error += ddx;
            if error > ddy {
                x += xstep;
                error -= ddy;
                match (error + errorprev).cmp(&ddy) {
                    std::cmp::Ordering::Less => push(&mut out, y, x - xstep),
                    std::cmp::Ordering::Greater => push(&mut out, y - ystep, x),
                    std::cmp::Ordering::Equal => {
                        push(&mut out, y, x - xstep);
                        push(&mut out, y - ystep, x);
                    }
                }
            }
            push(&mut out, y, x);
            errorprev = error;
        }
    }
    out
}

/// Walk the supercover line from `tx` to `rx` and group crossed building
/// cells into obstruction segments.
///
/// Cells are ordered by their exact (integer) projection onto the path, and
/// cells sharing a projection form one station that is blocked if any of its
/// cells is a building. That makes the profile of `rx → tx` the exact mirror
/// of `tx → rx`.
pub fn trace_obstructions(
    env: &EnvironmentGrid,
    tx: GridPoint,
    rx: GridPoint,
) -> Result<ObstructionProfile> {
    env.check_bounds(tx)?;
    env.check_bounds(rx)?;
    if env.is_building(tx) {
        return Err(Error::TxInsideBuilding {
            row: tx.row,
            col: tx.col,
        });
    }
    if env.is_building(rx) {
        return Err(Error::RxInsideBuilding {
            row: rx.row,
            col: rx.col,
        });
    }
    let path_cells = tx.distance(rx);
    let path_length = path_cells * env.cell_size;
    if tx == rx {
        return Ok(ObstructionProfile {
            segments: Vec::new(),
            total_crossed_cells: 0,
            path_length,
        });
    }

    let vr = rx.row as i64 - tx.row as i64;
    let vc = rx.col as i64 - tx.col as i64;
    let len2 = vr * vr + vc * vc;

    // projection key -> (blocked, first blocked cell)
    let mut stations: BTreeMap<i64, Option<GridPoint>> = BTreeMap::new();
    let mut crossed = 0usize;
    for cell in supercover(tx, rx) {
        let key = (cell.row as i64 - tx.row as i64) * vr + (cell.col as i64 - tx.col as i64) * vc;
        let blocked = env.is_building(cell);
        if blocked {
            crossed += 1;
        }
        let slot = stations.entry(key).or_insert(None);
        if blocked {
            *slot = Some(match *slot {
                Some(prev) if prev <= cell => prev,
                _ => cell,
            });
        }
    }

    let h = env.blocking_height();
    let min_d = 1e-3 * env.cell_size;
    let mut segments = Vec::new();
    let mut run: Option<(i64, GridPoint, i64, GridPoint, usize)> = None;
    let close = |run: (i64, GridPoint, i64, GridPoint, usize),
                 segments: &mut Vec<ObstructionSegment>| {
        let (k0, entry, k1, exit, cells) = run;
        let tau = (k0 + k1) as f64 / (2.0 * len2 as f64);
        let d1 = (tau * path_length).max(min_d);
        let d2 = ((1.0 - tau) * path_length).max(min_d);
        segments.push(ObstructionSegment {
            entry,
            exit,
            blocking_height: h,
            d1,
            d2,
            cells,
        });
    };
    for (&key, &blocked) in &stations {
        match (blocked, run.as_mut()) {
            (Some(cell), Some(r)) => {
                r.2 = key;
                r.3 = cell;
                r.4 += 1;
            }
            (Some(cell), None) => run = Some((key, cell, key, cell, 1)),
            (None, Some(_)) => close(run.take().unwrap(), &mut segments),
            (None, None) => {}
        }
    }
    if let Some(r) = run {
        close(r, &mut segments);
    }

    Ok(ObstructionProfile {
        segments,
        total_crossed_cells: crossed,
        path_length,
    })
}
