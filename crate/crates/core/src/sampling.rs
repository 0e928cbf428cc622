//! Sampling masks, RSS measurement, power-invariant normalization and the
//! three-channel conditioning tensor.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, Array3, ArrayView2};
use rand::seq::index;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{extract_edges, extract_vertices, EnvironmentGrid, GridPoint};
use crate::propagation::RadioMap;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStrategy {
    Random,
    Edge,
    Vertex,
    Hybrid,
    BudgetMatchedRandom,
}

impl SamplingStrategy {
    pub fn name(self) -> &'static str {
        match self {
            SamplingStrategy::Random => "random",
            SamplingStrategy::Edge => "edge",
            SamplingStrategy::Vertex => "vertex",
            SamplingStrategy::Hybrid => "hybrid",
            SamplingStrategy::BudgetMatchedRandom => "budget_matched_random",
        }
    }
}

impl fmt::Display for SamplingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "random" => SamplingStrategy::Random,
            "edge" => SamplingStrategy::Edge,
            "vertex" => SamplingStrategy::Vertex,
            "hybrid" => SamplingStrategy::Hybrid,
            "budget_matched_random" => SamplingStrategy::BudgetMatchedRandom,
            other => {
                return Err(Error::ConfigInvalid(format!(
                    "unknown sampling strategy {other:?}"
                )))
            }
        })
    }
}

/// Probe positions, kept sorted in row-major order with no duplicates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingMask {
    pub points: Vec<GridPoint>,
    pub strategy: SamplingStrategy,
    pub seed: u64,
}

impl SamplingMask {
    fn from_set(points: BTreeSet<GridPoint>, strategy: SamplingStrategy, seed: u64) -> Self {
        Self {
            points: points.into_iter().collect(),
            strategy,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Fraction of the environment's free cells that are sampled.
    pub fn sampling_ratio(&self, env: &EnvironmentGrid) -> f64 {
        let free = env.free_cell_count();
        if free == 0 {
            0.0
        } else {
            self.len() as f64 / free as f64
        }
    }

    /// Every point is a free sensing cell and there are no duplicates.
    pub fn check(&self, env: &EnvironmentGrid) -> Result<()> {
        let mut seen = BTreeSet::new();
        for &p in &self.points {
            if !env.contains(p) {
                return Err(Error::MaskOutsideMap {
                    row: p.row,
                    col: p.col,
                });
            }
            if !env.is_free(p) || !env.is_sensing(p) {
                return Err(Error::InvalidParameter(format!(
                    "mask point ({}, {}) is not a free sensing cell",
                    p.row, p.col
                )));
            }
            if !seen.insert(p) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate mask point ({}, {})",
                    p.row, p.col
                )));
            }
        }
        Ok(())
    }
}

fn draw_without_replacement(
    pool: &[GridPoint],
    budget: usize,
    seed: u64,
) -> Result<BTreeSet<GridPoint>> {
    if budget > pool.len() {
        return Err(Error::BudgetTooLarge {
            requested: budget,
            available: pool.len(),
        });
    }
    let mut rng = seed::rng(seed);
    Ok(index::sample(&mut rng, pool.len(), budget)
        .into_iter()
        .map(|i| pool[i])
        .collect())
}

/// `budget` free sensing cells drawn uniformly without replacement.
pub fn random_mask(env: &EnvironmentGrid, budget: usize, seed: u64) -> Result<SamplingMask> {
    let pool = env.free_sensing_cells();
    let set = draw_without_replacement(&pool, budget, seed)?;
    Ok(SamplingMask::from_set(set, SamplingStrategy::Random, seed))
}

/// Edge cells inside the sensing region.
pub fn edge_mask(env: &EnvironmentGrid) -> SamplingMask {
    let set = extract_edges(env)
        .into_iter()
        .filter(|&p| env.is_sensing(p))
        .collect();
    SamplingMask::from_set(set, SamplingStrategy::Edge, 0)
}

/// Corner cells inside the sensing region.
pub fn vertex_mask(env: &EnvironmentGrid) -> SamplingMask {
    let set = extract_vertices(env)
        .into_iter()
        .filter(|&p| env.is_sensing(p))
        .collect();
    SamplingMask::from_set(set, SamplingStrategy::Vertex, 0)
}

/// Number of random additions so that they make up `random_fraction` of a
/// mask that already holds `fixed` points.
pub fn hybrid_random_count(fixed: usize, random_fraction: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&random_fraction) {
        return Err(Error::InvalidParameter(format!(
            "random fraction {random_fraction} outside [0, 1]"
        )));
    }
    if fixed == 0 || random_fraction == 0.0 {
        return Ok(0);
    }
    if random_fraction >= 1.0 {
        return Err(Error::BudgetTooLarge {
            requested: usize::MAX,
            available: 0,
        });
    }
    Ok((random_fraction * fixed as f64 / (1.0 - random_fraction)).round() as usize)
}

/// Vertex mask plus uniformly drawn non-vertex sensing cells making up
/// `random_fraction` of the final mask.
pub fn hybrid_mask(env: &EnvironmentGrid, random_fraction: f64, seed: u64) -> Result<SamplingMask> {
    let vertices = vertex_mask(env);
    let extra = hybrid_random_count(vertices.len(), random_fraction)?;
    let taken: BTreeSet<GridPoint> = vertices.points.iter().copied().collect();
    let pool: Vec<GridPoint> = env
        .free_sensing_cells()
        .into_iter()
        .filter(|p| !taken.contains(p))
        .collect();
    let mut set = draw_without_replacement(&pool, extra, seed)?;
    set.extend(taken);
    Ok(SamplingMask::from_set(set, SamplingStrategy::Hybrid, seed))
}

/// Random mask with the same number of points as `reference`.
pub fn budget_matched_random(
    env: &EnvironmentGrid,
    reference: &SamplingMask,
    seed: u64,
) -> Result<SamplingMask> {
    let mut mask = random_mask(env, reference.len(), seed)?;
    mask.strategy = SamplingStrategy::BudgetMatchedRandom;
    Ok(mask)
}

/// Relative levels are snapped to this grid (dB) before exponentiation, so a
/// uniform dB offset of the raw values cancels exactly.
pub const NORMALIZATION_QUANTUM_DB: f64 = 1.0 / (1u64 << 20) as f64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub mask: SamplingMask,
    /// Measured RSS in dBm, one per mask point.
    pub raw: Vec<f64>,
    /// Linear power relative to the strongest measurement, once normalized.
    pub normalized: Option<Vec<f64>>,
    pub noise_std: f64,
}

impl MeasurementSet {
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// Same measurements with every raw value shifted by `offset_db`.
    pub fn shifted(&self, offset_db: f64) -> Self {
        Self {
            mask: self.mask.clone(),
            raw: self.raw.iter().map(|v| v + offset_db).collect(),
            normalized: None,
            noise_std: self.noise_std,
        }
    }
}

/// y_i = map(r_i) + N(0, noise_std²).
pub fn sample_rss(
    rm: &RadioMap,
    mask: &SamplingMask,
    noise_std: f64,
    seed: u64,
) -> Result<MeasurementSet> {
    if rm.normalized {
        return Err(Error::InvalidParameter(
            "RSS must be sampled from a dBm-domain map".into(),
        ));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise std {noise_std} must be >= 0"
        )));
    }
    let (rows, cols) = rm.dim();
    for p in &mask.points {
        if p.row >= rows || p.col >= cols {
            return Err(Error::MaskOutsideMap {
                row: p.row,
                col: p.col,
            });
        }
    }
    let mut rng = seed::rng(seed);
    let noise = Normal::new(0.0, noise_std.max(f64::MIN_POSITIVE)).expect("valid std");
    let raw = mask
        .points
        .iter()
        .map(|&p| {
            let v = rm.get(p);
            if noise_std > 0.0 {
                v + noise.sample(&mut rng)
            } else {
                v
            }
        })
        .collect();
    Ok(MeasurementSet {
        mask: mask.clone(),
        raw,
        normalized: None,
        noise_std,
    })
}

/// ỹ_i = y_i / max_j y_j in linear power.
pub fn normalize_rss(m: &MeasurementSet) -> Result<MeasurementSet> {
    if m.raw.is_empty() {
        return Err(Error::EmptyMeasurements);
    }
    if m.raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("raw RSS"));
    }
    let max = m.raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let q = NORMALIZATION_QUANTUM_DB;
    let normalized = m
        .raw
        .iter()
        .map(|&y| {
            let rel = ((y - max) / q).round() * q;
            10f64.powf(rel / 10.0)
        })
        .collect();
    Ok(MeasurementSet {
        normalized: Some(normalized),
        ..m.clone()
    })
}

/// Channel 0: building layout. Channels 1 and 2: identical sparse maps of
/// the normalized RSS, zero where nothing was measured.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionTensor {
    pub channels: Array3<f64>,
}

impl ConditionTensor {
    pub fn dim(&self) -> (usize, usize) {
        let s = self.channels.shape();
        (s[1], s[2])
    }

    pub fn layout(&self) -> ArrayView2<'_, f64> {
        self.channels.index_axis(ndarray::Axis(0), 0)
    }

    pub fn sparse(&self) -> ArrayView2<'_, f64> {
        self.channels.index_axis(ndarray::Axis(0), 1)
    }

    /// Cells carrying a measurement, with their normalized values, in
    /// row-major order.
    pub fn measurements(&self) -> Vec<(GridPoint, f64)> {
        self.sparse()
            .indexed_iter()
            .filter(|(_, &v)| v != 0.0)
            .map(|((r, c), &v)| (GridPoint::new(r, c), v))
            .collect()
    }
}

pub fn build_condition_tensor(
    env: &EnvironmentGrid,
    m: &MeasurementSet,
) -> Result<ConditionTensor> {
    let (rows, cols) = env.dim();
    let mut channels = Array3::zeros((3, rows, cols));
    for ((r, c), &b) in env.occupancy.indexed_iter() {
        channels[[0, r, c]] = if b { 1.0 } else { 0.0 };
    }
    if !m.is_empty() {
        let values = m.normalized.as_ref().ok_or_else(|| {
            Error::InvalidParameter("measurements must be normalized first".into())
        })?;
        if values.len() != m.mask.len() {
            return Err(Error::ShapeMismatch {
                expected: (m.mask.len(), 1),
                actual: (values.len(), 1),
            });
        }
        for (p, &v) in m.mask.points.iter().zip(values) {
            if p.row >= rows || p.col >= cols {
                return Err(Error::ShapeMismatch {
                    expected: (rows, cols),
                    actual: (p.row + 1, p.col + 1),
                });
            }
            channels[[1, p.row, p.col]] = v;
            channels[[2, p.row, p.col]] = v;
        }
    }
    Ok(ConditionTensor { channels })
}

/// One `row,col` line per point.
pub fn write_mask_text<W: Write>(points: &[GridPoint], mut out: W) -> std::io::Result<()> {
    for p in points {
        writeln!(out, "{},{}", p.row, p.col)?;
    }
    Ok(())
}

pub fn read_mask_text(path: &Path) -> Result<Vec<GridPoint>> {
    let file = std::fs::File::open(path).map_err(|_| Error::FileNotFound(path.to_path_buf()))?;
    let mut points = Vec::new();
    for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || Error::Parse {
            path: path.to_path_buf(),
            reason: format!("line {}: expected `row,col`", n + 1),
        };
        let (r, c) = line.split_once(',').ok_or_else(bad)?;
        let row = r.trim().parse().map_err(|_| bad())?;
        let col = c.trim().parse().map_err(|_| bad())?;
        points.push(GridPoint::new(row, col));
    }
    Ok(points)
}

/// Binary (P5) PGM, 255 at sampled cells and 0 elsewhere.
pub fn write_mask_pgm<W: Write>(
    points: &[GridPoint],
    dim: (usize, usize),
    mut out: W,
) -> Result<()> {
    let (rows, cols) = dim;
    let mut img = Array2::<u8>::zeros(dim);
    for p in points {
        if p.row >= rows || p.col >= cols {
            return Err(Error::MaskOutsideMap {
                row: p.row,
                col: p.col,
            });
        }
        img[[p.row, p.col]] = 255;
    }
    write!(out, "P5\n{cols} {rows}\n255\n")?;
    out.write_all(img.as_slice().expect("standard layout"))?;
    Ok(())
}

pub fn read_mask_pgm(path: &Path) -> Result<(Vec<GridPoint>, (usize, usize))> {
    let bytes = std::fs::read(path).map_err(|_| Error::FileNotFound(path.to_path_buf()))?;
    let bad = |reason: &str| Error::Parse {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut pos = 0usize;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if tokens[0] != "P5" {
        return Err(bad("not a binary PGM"));
    }
    let cols: usize = tokens[1].parse().map_err(|_| bad("bad width"))?;
    let rows: usize = tokens[2].parse().map_err(|_| bad("bad height"))?;
    if tokens[3] != "255" {
        return Err(bad("only 8-bit PGM supported"));
    }
    pos += 1;
    let data = bytes
        .get(pos..pos + rows * cols)
        .ok_or_else(|| bad("truncated pixel data"))?;
    let points = data
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= 128)
        .map(|(i, _)| GridPoint::new(i / cols, i % cols))
        .collect();
    Ok((points, (rows, cols)))
}
