use std::collections::VecDeque;

use ndarray::Array2;

use super::{Estimate, Method};
use crate::error::{Error, Result};
use crate::propagation::RadioMap;

/// Cell of maximum value inside `region`; the first in row-major order wins
/// ties.
pub fn argmax_localize(rm: &RadioMap, region: &Array2<bool>) -> Result<Estimate> {
    if region.dim() != rm.dim() {
        return Err(Error::ShapeMismatch {
            expected: rm.dim(),
            actual: region.dim(),
        });
    }
    let mut best: Option<((usize, usize), f64)> = None;
    for ((r, c), &v) in rm.values.indexed_iter() {
        if region[[r, c]] && best.is_none_or(|(_, b)| v > b) {
            best = Some(((r, c), v));
        }
    }
    let ((r, c), _) = best.ok_or(Error::EmptyRegion)?;
    Ok(Estimate::new(r as f64, c as f64, Method::Argmax))
}

/// Cells by descending value, row-major among equals.
fn ranked(values: &Array2<f64>) -> Vec<((usize, usize), f64)> {
    let mut cells: Vec<_> = values.indexed_iter().map(|(i, &v)| (i, v)).collect();
    cells.sort_by(|a, b| b.1.total_cmp(&a.1));
    cells
}

fn centroid(cells: impl Iterator<Item = ((usize, usize), f64)>) -> (f64, f64) {
    let (mut sr, mut sc, mut sw) = (0.0, 0.0, 0.0);
    for ((r, c), w) in cells {
        sr += w * r as f64;
        sc += w * c as f64;
        sw += w;
    }
    (sr / sw, sc / sw)
}

/// Intensity-weighted mean position of the `k` brightest cells.
pub fn topk_weighted_centroid(rm: &RadioMap, k: usize) -> Result<Estimate> {
    let (rows, cols) = rm.dim();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > rows * cols {
        return Err(Error::KTooLarge {
            k,
            cells: rows * cols,
        });
    }
    let top = &ranked(&rm.values)[..k];
    let (row, col) = if top.iter().map(|&(_, v)| v).sum::<f64>() > 0.0 {
        centroid(top.iter().copied())
    } else {
        centroid(top.iter().map(|&(i, _)| (i, 1.0)))
    };
    Ok(Estimate::new(row, col, Method::TopK))
}

/// p-th percentile with linear interpolation between order statistics.
pub(crate) fn percentile(values: &Array2<f64>, p: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    let pos = p / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    let frac = pos - lo as f64;
    if frac == 0.0 || v[lo] == v[hi] {
        v[lo]
    } else {
        v[lo] + frac * (v[hi] - v[lo])
    }
}

/// Unweighted centre of all cells at or above the p-th percentile.
pub fn threshold_region_center(rm: &RadioMap, p: f64) -> Result<Estimate> {
    if !(p > 0.0 && p < 100.0) {
        return Err(Error::InvalidParameter(format!(
            "percentile {p} outside (0, 100)"
        )));
    }
    let t = percentile(&rm.values, p);
    let above: Vec<_> = rm
        .values
        .indexed_iter()
        .filter(|(_, &v)| v >= t)
        .map(|(i, _)| (i, 1.0))
        .collect();
    if above.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let (row, col) = centroid(above.into_iter());
    Ok(Estimate::new(row, col, Method::Threshold))
}

/// 8-connected components of `mask`, each as a row-major list of cells.
pub fn components(mask: &Array2<bool>) -> Vec<Vec<(usize, usize)>> {
    let (rows, cols) = mask.dim();
    let mut seen = Array2::from_elem(mask.dim(), false);
    let mut out = Vec::new();
    for ((r, c), &on) in mask.indexed_iter() {
        if !on || seen[[r, c]] {
            continue;
        }
        seen[[r, c]] = true;
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([(r, c)]);
        while let Some((cr, cc)) = queue.pop_front() {
            comp.push((cr, cc));
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    let nr = cr as isize + dr;
                    let nc = cc as isize + dc;
                    if nr < 0 || nc < 0 || nr as usize >= rows || nc as usize >= cols {
                        continue;
                    }
                    let (nr, nc) = (nr as usize, nc as usize);
                    if mask[[nr, nc]] && !seen[[nr, nc]] {
                        seen[[nr, nc]] = true;
                        queue.push_back((nr, nc));
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Centroid of the largest 8-connected component above `alpha · max`.
/// Equal-size components are separated by their brightest cell.
pub fn largest_blob_centroid(rm: &RadioMap, alpha: f64) -> Result<Estimate> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha {alpha} outside (0, 1]"
        )));
    }
    let max = rm.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NonFinite("radio map"));
    }
    let threshold = alpha * max;
    let mask = rm.values.mapv(|v| v >= threshold);
    let comps = components(&mask);
    let peak = |comp: &Vec<(usize, usize)>| {
        comp.iter()
            .map(|&(r, c)| rm.values[[r, c]])
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut best: Option<(&Vec<(usize, usize)>, f64)> = None;
    for comp in &comps {
        let p = peak(comp);
        let better = match best {
            None => true,
            Some((b, bp)) => comp.len() > b.len() || (comp.len() == b.len() && p > bp),
        };
        if better {
            best = Some((comp, p));
        }
    }
    let (comp, _) = best.ok_or(Error::EmptyRegion)?;
    let (row, col) = centroid(comp.iter().map(|&i| (i, 1.0)));
    Ok(Estimate::new(row, col, Method::LargestBlob))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Component-wise median, with the mean pairwise distance as uncertainty.
pub fn ensemble_localize(estimates: &[Estimate]) -> Result<Estimate> {
    if estimates.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let row = median(estimates.iter().map(|e| e.row).collect());
    let col = median(estimates.iter().map(|e| e.col).collect());
    let n = estimates.len();
    let mut spread = 0.0;
    if n > 1 {
        for i in 0..n {
            for j in i + 1..n {
                spread += estimates[i].distance(&estimates[j]);
            }
        }
        spread /= (n * (n - 1) / 2) as f64;
    }
    let mut e = Estimate::new(row, col, Method::Ensemble);
    e.uncertainty = Some(spread);
    e.converged = estimates.iter().all(|e| e.converged);
    Ok(e)
}
