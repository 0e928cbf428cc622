//! On-disk intermediate artifacts: measurement tables and stacks of
//! reconstructed maps.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataio::write_atomic;
use crate::error::{Error, Result};
use crate::geometry::GridPoint;
use crate::metrics::format_value;
use crate::sampling::{MeasurementSet, SamplingMask, SamplingStrategy};

const STACK_MAGIC: &[u8; 4] = b"RDMS";
const STACK_VERSION: u32 = 1;

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::UpstreamArtifactMissing(path.to_path_buf()))
    }
}

fn parse_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// `row,col,rss_dbm`, values printed in shortest round-trip form.
pub fn write_measurements(path: &Path, m: &MeasurementSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["row", "col", "rss_dbm"])?;
    for (p, v) in m.mask.points.iter().zip(&m.raw) {
        w.write_record([p.row.to_string(), p.col.to_string(), format_value(*v)])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

pub fn read_measurements(
    path: &Path,
    strategy: SamplingStrategy,
    noise_std: f64,
) -> Result<MeasurementSet> {
    require(path)?;
    let mut r = csv::Reader::from_path(path)?;
    let mut points = Vec::new();
    let mut raw = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).ok_or_else(|| parse_err(path, "short record"));
        let row = field(0)?.parse().map_err(|_| parse_err(path, "bad row"))?;
        let col = field(1)?.parse().map_err(|_| parse_err(path, "bad col"))?;
        let v: f64 = field(2)?.parse().map_err(|_| parse_err(path, "bad rss"))?;
        points.push(GridPoint::new(row, col));
        raw.push(v);
    }
    Ok(MeasurementSet {
        mask: SamplingMask {
            points,
            strategy,
            seed: 0,
        },
        raw,
        normalized: None,
        noise_std,
    })
}

/// Binary stack of equally sized f64 maps: magic, version, count, rows,
/// cols (u32 little endian), then the values in row-major order.
pub fn write_map_stack(path: &Path, maps: &[Array2<f64>]) -> Result<()> {
    let (rows, cols) = maps.first().map_or((0, 0), |m| m.dim());
    let mut buf = Vec::with_capacity(20 + maps.len() * rows * cols * 8);
    buf.write_all(STACK_MAGIC)?;
    for v in [STACK_VERSION, maps.len() as u32, rows as u32, cols as u32] {
        buf.write_all(&v.to_le_bytes())?;
    }
    for m in maps {
        if m.dim() != (rows, cols) {
            return Err(Error::ShapeMismatch {
                expected: (rows, cols),
                actual: m.dim(),
            });
        }
        for v in m.iter() {
            buf.write_all(&v.to_le_bytes())?;
        }
    }
    write_atomic(path, &buf)
}

pub fn read_map_stack(path: &Path) -> Result<Vec<Array2<f64>>> {
    require(path)?;
    let bytes = std::fs::read(path)?;
    let mut input = bytes.as_slice();
    let mut magic = [0u8; 4];
    input
        .read_exact(&mut magic)
        .map_err(|_| parse_err(path, "truncated header"))?;
    if &magic != STACK_MAGIC {
        return Err(parse_err(path, "not a map stack"));
    }
    let mut word = || -> Result<u32> {
        let mut b = [0u8; 4];
        input
            .read_exact(&mut b)
            .map_err(|_| parse_err(path, "truncated header"))?;
        Ok(u32::from_le_bytes(b))
    };
    let version = word()?;
    if version != STACK_VERSION {
        return Err(parse_err(path, format!("unsupported version {version}")));
    }
    let (count, rows, cols) = (word()? as usize, word()? as usize, word()? as usize);
    let body = &bytes[20..];
    if body.len() != count * rows * cols * 8 {
        return Err(parse_err(path, "body length does not match the header"));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(values
        .chunks_exact((rows * cols).max(1))
        .take(count)
        .map(|c| Array2::from_shape_vec((rows, cols), c.to_vec()).expect("stack shape"))
        .collect())
}

/// One row of `samples/sampling.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingRow {
    pub scene_id: String,
    pub strategy: String,
    pub points: usize,
    pub free_cells: usize,
    pub ratio: f64,
}

/// One row of `estimates.csv`; position and error are empty when the
/// estimator failed, with the reason in `status`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub scene_id: String,
    pub strategy: String,
    pub method: String,
    pub row: Option<f64>,
    pub col: Option<f64>,
    pub le_m: Option<f64>,
    pub uncertainty: Option<f64>,
    pub converged: bool,
    pub status: String,
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    require(path)?;
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()?)
}
