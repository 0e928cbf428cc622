//! Per-pixel conditioning planes derived once per scene from the condition
//! tensor and reused at every reverse step.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::geometry::{EnvironmentGrid, GridPoint};
use crate::propagation::PropagationParams;
use crate::sampling::{build_condition_tensor, ConditionTensor, MeasurementSet};

/// Layout, mask indicator, sparse gain, interpolated gain, log-distance fit.
pub const CONDITION_PLANES: usize = 5;

/// Fewer measurements than this leave the log-distance plane empty.
const MIN_FIT_MEASUREMENTS: usize = 3;

#[derive(Clone, Debug)]
pub struct ConditionContext {
    pub planes: Vec<Array2<f64>>,
    /// Measured cells with their level relative to the strongest
    /// measurement, in gain units (≤ 0).
    pub measurements: Vec<(GridPoint, f64)>,
    pub occupancy: Array2<bool>,
    pub params: PropagationParams,
    pub cell_size: f64,
}

impl ConditionContext {
    pub fn new(cond: &ConditionTensor, params: &PropagationParams, cell_size: f64) -> Result<Self> {
        Self::with_search_region(cond, params, cell_size, None)
    }

    /// As [`ConditionContext::new`], with the log-distance source search
    /// limited to `region` (free cells only).
    pub fn with_search_region(
        cond: &ConditionTensor,
        params: &PropagationParams,
        cell_size: f64,
        region: Option<&Array2<bool>>,
    ) -> Result<Self> {
        if !(cell_size > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cell size {cell_size} must be positive"
            )));
        }
        let span = params.dynamic_range_db();
        let dim = cond.dim();
        let occupancy = cond.layout().mapv(|v| v > 0.5);
        let measurements: Vec<(GridPoint, f64)> = cond
            .measurements()
            .into_iter()
            .map(|(p, y)| (p, 10.0 * y.log10() / span))
            .collect();

        if let Some(r) = region {
            if r.dim() != dim {
                return Err(Error::ShapeMismatch {
                    expected: dim,
                    actual: r.dim(),
                });
            }
        }
        let layout = cond.layout().to_owned();
        let mut indicator = Array2::zeros(dim);
        let mut sparse = Array2::zeros(dim);
        for &(p, rel) in &measurements {
            indicator[[p.row, p.col]] = 1.0;
            sparse[[p.row, p.col]] = (1.0 + rel).clamp(0.0, 1.0);
        }
        let idw = interpolate(&occupancy, &measurements, cell_size);
        let fit = log_distance_plane(&occupancy, region, &measurements, params, cell_size);
        Ok(Self {
            planes: vec![layout, indicator, sparse, idw, fit],
            measurements,
            occupancy,
            params: *params,
            cell_size,
        })
    }

    /// Normalizes the measurements if needed and builds the context, searching
    /// for the source inside the restricted region.
    pub fn from_measurements(
        env: &EnvironmentGrid,
        m: &MeasurementSet,
        params: &PropagationParams,
    ) -> Result<Self> {
        let normalized;
        let m = if m.normalized.is_none() && !m.is_empty() {
            normalized = crate::sampling::normalize_rss(m)?;
            &normalized
        } else {
            m
        };
        let cond = build_condition_tensor(env, m)?;
        Self::with_search_region(&cond, params, env.cell_size, Some(&env.restricted))
    }

    pub fn dim(&self) -> (usize, usize) {
        self.occupancy.dim()
    }
}

/// Inverse-square-distance interpolation of the sparse gain values over free
/// cells.
fn interpolate(occupancy: &Array2<bool>, meas: &[(GridPoint, f64)], cell_size: f64) -> Array2<f64> {
    let mut out = Array2::zeros(occupancy.dim());
    if meas.is_empty() {
        return out;
    }
    for ((r, c), v) in out.indexed_iter_mut() {
        if occupancy[[r, c]] {
            continue;
        }
        let here = GridPoint::new(r, c);
        let mut num = 0.0;
        let mut den = 0.0;
        for &(p, rel) in meas {
            let d = here.distance(p) * cell_size;
            let w = 1.0 / (1.0 + d * d);
            num += w * (1.0 + rel).clamp(0.0, 1.0);
            den += w;
        }
        *v = num / den;
    }
    out
}

/// Free-space gain field around the cell whose log-distance law best
/// explains the relative measurements (offset fitted in closed form).
fn log_distance_plane(
    occupancy: &Array2<bool>,
    region: Option<&Array2<bool>>,
    meas: &[(GridPoint, f64)],
    params: &PropagationParams,
    cell_size: f64,
) -> Array2<f64> {
    let dim = occupancy.dim();
    let mut out = Array2::zeros(dim);
    if meas.len() < MIN_FIT_MEASUREMENTS {
        return out;
    }
    let n10 = 10.0 * params.pathloss_exponent;
    let span = params.dynamic_range_db();
    let attenuation =
        |a: GridPoint, b: GridPoint| n10 * (a.distance(b) * cell_size).max(1.0).log10();
    let rel_db: Vec<f64> = meas.iter().map(|&(_, rel)| rel * span).collect();

    // A region without free cells imposes nothing.
    let region = region.filter(|reg| reg.iter().zip(occupancy).any(|(&inside, &b)| inside && !b));
    let mut best: Option<(f64, GridPoint)> = None;
    let mut shifted = vec![0.0; meas.len()];
    for ((r, c), &b) in occupancy.indexed_iter() {
        if b || region.is_some_and(|reg| !reg[[r, c]]) {
            continue;
        }
        let cand = GridPoint::new(r, c);
        for (s, (&(p, _), &y)) in shifted.iter_mut().zip(meas.iter().zip(&rel_db)) {
            *s = y + attenuation(cand, p);
        }
        let mean = shifted.iter().sum::<f64>() / shifted.len() as f64;
        let sse: f64 = shifted.iter().map(|s| (s - mean).powi(2)).sum();
        if best.is_none_or(|(b, _)| sse < b) {
            best = Some((sse, cand));
        }
    }
    let Some((_, src)) = best else {
        return out;
    };
    for ((r, c), v) in out.indexed_iter_mut() {
        if !occupancy[[r, c]] {
            *v = (1.0 - attenuation(src, GridPoint::new(r, c)) / span).clamp(0.0, 1.0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::synthesize_radio_map;
    use crate::sampling::{random_mask, sample_rss};

    #[test]
    fn planes_follow_the_condition() {
        let env = EnvironmentGrid::open(24);
        let params = PropagationParams::default();
        let tx = GridPoint::new(18, 12);
        let rm = synthesize_radio_map(&env, tx, &params).unwrap();
        let mask = random_mask(&env, 30, 1).unwrap();
        let m = sample_rss(&rm, &mask, 0.0, 2).unwrap();
        let ctx = ConditionContext::from_measurements(&env, &m, &params).unwrap();
        assert_eq!(ctx.planes.len(), CONDITION_PLANES);
        assert!(ctx.planes[0].iter().all(|&v| v == 0.0));
        assert_eq!(ctx.planes[1].sum(), 30.0);
        assert!(ctx.measurements.iter().all(|&(_, r)| r <= 0.0));
        assert!(ctx.measurements.iter().any(|&(_, r)| r == 0.0));
        // An open scene follows the log-distance law exactly, so the fit
        // finds the emitter and its plane peaks there.
        let fit = &ctx.planes[4];
        assert_eq!(fit[[tx.row, tx.col]], 1.0);
        let truth = rm.normalized(&env);
        let err: f64 = fit
            .indexed_iter()
            .filter(|((r, c), _)| !env.occupancy[[*r, *c]])
            .map(|((r, c), v)| (v - truth.values[[r, c]]).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "max deviation {err}");
    }

    #[test]
    fn empty_measurements_give_empty_planes() {
        let env = EnvironmentGrid::open(12);
        let m = MeasurementSet {
            mask: random_mask(&env, 0, 0).unwrap(),
            raw: vec![],
            normalized: None,
            noise_std: 0.0,
        };
        let ctx =
            ConditionContext::from_measurements(&env, &m, &PropagationParams::default()).unwrap();
        for p in &ctx.planes[1..] {
            assert!(p.iter().all(|&v| v == 0.0));
        }
    }
}
