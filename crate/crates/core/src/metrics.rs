//! Map-reconstruction and localization metrics, and the per-scene report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GridPoint;
use crate::localization::Estimate;

pub const SSIM_WINDOW: usize = 8;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn same_shape(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<()> {
    if pred.dim() != truth.dim() {
        return Err(Error::ShapeMismatch {
            expected: truth.dim(),
            actual: pred.dim(),
        });
    }
    Ok(())
}

fn squared_error(pred: &Array2<f64>, truth: &Array2<f64>) -> f64 {
    pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum()
}

pub fn mse(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<f64> {
    same_shape(pred, truth)?;
    Ok(squared_error(pred, truth) / truth.len() as f64)
}

pub fn rmse(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<f64> {
    mse(pred, truth).map(f64::sqrt)
}

/// Σ(pred − truth)² / Σ truth².
pub fn nmse(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<f64> {
    same_shape(pred, truth)?;
    let energy: f64 = truth.iter().map(|t| t * t).sum();
    if energy == 0.0 {
        return Err(Error::ZeroEnergyTruth);
    }
    Ok(squared_error(pred, truth) / energy)
}

/// Mean SSIM over non-overlapping 8×8 blocks; partial blocks at the right
/// and bottom borders are ignored.
pub fn ssim(pred: &Array2<f64>, truth: &Array2<f64>, dynamic_range: f64) -> Result<f64> {
    same_shape(pred, truth)?;
    let (rows, cols) = truth.dim();
    if rows < SSIM_WINDOW || cols < SSIM_WINDOW {
        return Err(Error::MapTooSmallForWindow {
            rows,
            cols,
            window: SSIM_WINDOW,
        });
    }
    let c1 = (SSIM_K1 * dynamic_range).powi(2);
    let c2 = (SSIM_K2 * dynamic_range).powi(2);
    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let mut total = 0.0;
    let mut blocks = 0usize;
    for br in 0..rows / SSIM_WINDOW {
        for bc in 0..cols / SSIM_WINDOW {
            let cells = || {
                (0..SSIM_WINDOW).flat_map(move |i| {
                    (0..SSIM_WINDOW).map(move |j| (br * SSIM_WINDOW + i, bc * SSIM_WINDOW + j))
                })
            };
            let mx = cells().map(|i| pred[i]).sum::<f64>() / n;
            let my = cells().map(|i| truth[i]).sum::<f64>() / n;
            let vx = cells()
                .map(|i| (pred[i] - mx) * (pred[i] - mx))
                .sum::<f64>()
                / n;
            let vy = cells()
                .map(|i| (truth[i] - my) * (truth[i] - my))
                .sum::<f64>()
                / n;
            let cxy = cells()
                .map(|i| (pred[i] - mx) * (truth[i] - my))
                .sum::<f64>()
                / n;
            let num = (2.0 * (mx * my) + c1) * (2.0 * cxy + c2);
            let den = ((mx * mx + my * my) + c1) * ((vx + vy) + c2);
            total += num / den;
            blocks += 1;
        }
    }
    Ok(total / blocks as f64)
}

/// 10·log10(r² / MSE); identical maps give +∞.
pub fn psnr(pred: &Array2<f64>, truth: &Array2<f64>, dynamic_range: f64) -> Result<f64> {
    let e = mse(pred, truth)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (dynamic_range * dynamic_range / e).log10())
}

/// Euclidean distance in meters.
pub fn localization_error(est: &Estimate, truth: GridPoint, cell_size: f64) -> f64 {
    (est.row - truth.row as f64).hypot(est.col - truth.col as f64) * cell_size
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub scene_id: String,
    /// Experimental arm, e.g. the sampling strategy.
    pub group: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Summary column order.
pub const SUMMARY_COLUMNS: [&str; 6] = ["nmse", "rmse", "ssim", "psnr", "le", "sampling_ratio"];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub records: Vec<MetricRecord>,
}

impl EvalReport {
    pub fn push(&mut self, scene_id: &str, group: &str, metric: &str, value: f64) {
        self.records.push(MetricRecord {
            scene_id: scene_id.to_string(),
            group: group.to_string(),
            metric: metric.to_string(),
            value,
        });
    }

    /// Mean and sample standard deviation per (group, metric).
    pub fn aggregates(&self) -> BTreeMap<(String, String), Aggregate> {
        let mut values: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
        for r in &self.records {
            values
                .entry((r.group.clone(), r.metric.clone()))
                .or_default()
                .push(r.value);
        }
        values
            .into_iter()
            .map(|(k, v)| {
                let n = v.len();
                let mean = v.iter().sum::<f64>() / n as f64;
                let std = if n > 1 {
                    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                } else {
                    0.0
                };
                (
                    k,
                    Aggregate {
                        mean,
                        std,
                        count: n,
                    },
                )
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scene_id", "group", "metric", "value"])?;
        for r in &self.records {
            w.write_record([
                r.scene_id.as_str(),
                r.group.as_str(),
                r.metric.as_str(),
                &format_value(r.value),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One row per group with the mean of each summary column; missing
    /// metrics print as "-".
    pub fn summary_table(&self) -> String {
        let agg = self.aggregates();
        let mut groups: Vec<&String> = agg.keys().map(|(g, _)| g).collect();
        groups.dedup();
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# maps compared in the normalized gain domain; SSIM over {SSIM_WINDOW}x{SSIM_WINDOW} blocks, K1={SSIM_K1}, K2={SSIM_K2}, L=1.0; LE in meters; sampling ratio in percent"
        );
        let width = groups.iter().map(|g| g.len()).max().unwrap_or(0).max(24) + 2;
        let _ = write!(s, "{:<width$}", "group");
        for c in SUMMARY_COLUMNS {
            let _ = write!(s, "{c:>16}");
        }
        s.push('\n');
        for g in groups {
            let _ = write!(s, "{g:<width$}");
            for c in SUMMARY_COLUMNS {
                match agg.get(&(g.clone(), c.to_string())) {
                    Some(a) if c == "sampling_ratio" => {
                        let _ = write!(s, "{:>16}", format!("{:.2}%", 100.0 * a.mean));
                    }
                    Some(a) => {
                        let _ = write!(s, "{:>16}", format_summary(a.mean));
                    }
                    None => {
                        let _ = write!(s, "{:>16}", "-");
                    }
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Shortest round-trip representation; infinities spelled out.
pub fn format_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn format_summary(v: f64) -> String {
    if !v.is_finite() {
        format_value(v)
    } else if v != 0.0 && v.abs() < 1e-3 {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}
