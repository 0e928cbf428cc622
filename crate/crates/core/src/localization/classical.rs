//! RSS-only estimators built on the log-distance model
//! y = P0 − 10·n·log10(d / d_ref).

use std::f64::consts::LN_10;

use nalgebra::{Matrix3, Vector3};

use super::{Estimate, Method};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{EnvironmentGrid, GridPoint};
use crate::sampling::MeasurementSet;

pub const NLS_MAX_ITERATIONS: usize = 200;
pub const NLS_STEP_TOLERANCE: f64 = 1e-6;
const NLS_INITIAL_DAMPING: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathlossModel {
    /// Received power at the reference distance, dBm.
    pub p0: f64,
    pub exponent: f64,
    /// Meters.
    pub reference_distance: f64,
}

impl PathlossModel {
    pub fn new(p0: f64, exponent: f64) -> Self {
        Self {
            p0,
            exponent,
            reference_distance: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.exponent > 0.0 && self.reference_distance > 0.0 && self.p0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "path-loss model needs n > 0 and a positive reference distance (got {self:?})"
            )));
        }
        Ok(())
    }

    /// Mean RSS at `d` meters; distances inside the reference are clamped.
    pub fn mean_rss(&self, d: f64) -> f64 {
        self.p0
            - 10.0
                * self.exponent
                * (d.max(self.reference_distance) / self.reference_distance).log10()
    }

    /// Distance implied by an RSS value.
    pub fn invert(&self, rss: f64) -> f64 {
        self.reference_distance * 10f64.powf((self.p0 - rss) / (10.0 * self.exponent))
    }
}

/// Anchor positions in cell coordinates with their RSS in dBm.
#[derive(Clone, Debug, PartialEq)]
pub struct RssObservations {
    pub positions: Vec<[f64; 2]>,
    pub rss: Vec<f64>,
    pub cell_size: f64,
    pub dim: (usize, usize),
    /// First start of the NLS search.
    pub sensing_centroid: [f64; 2],
}

impl RssObservations {
    pub fn new(m: &MeasurementSet, env: &EnvironmentGrid) -> Result<Self> {
        for p in &m.mask.points {
            if !env.contains(*p) {
                return Err(Error::MaskOutsideMap {
                    row: p.row,
                    col: p.col,
                });
            }
        }
        let sensing: Vec<GridPoint> = env.free_sensing_cells();
        let sensing_centroid = if sensing.is_empty() {
            [
                (env.rows() as f64 - 1.0) / 2.0,
                (env.cols() as f64 - 1.0) / 2.0,
            ]
        } else {
            let n = sensing.len() as f64;
            [
                sensing.iter().map(|p| p.row as f64).sum::<f64>() / n,
                sensing.iter().map(|p| p.col as f64).sum::<f64>() / n,
            ]
        };
        Ok(Self {
            positions: m
                .mask
                .points
                .iter()
                .map(|p| [p.row as f64, p.col as f64])
                .collect(),
            rss: m.raw.clone(),
            cell_size: env.cell_size,
            dim: env.dim(),
            sensing_centroid,
        })
    }

    pub fn len(&self) -> usize {
        self.rss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rss.is_empty()
    }

    fn distance_m(&self, i: usize, x: [f64; 2]) -> f64 {
        let p = self.positions[i];
        (p[0] - x[0]).hypot(p[1] - x[1]) * self.cell_size
    }

    fn require(&self, n: usize) -> Result<()> {
        if self.len() < n {
            return Err(Error::TooFewMeasurements {
                required: n,
                got: self.len(),
            });
        }
        Ok(())
    }

    /// Anchors must span two dimensions.
    fn check_spread(&self) -> Result<()> {
        let n = self.len() as f64;
        if self.is_empty() {
            return Err(Error::TooFewMeasurements {
                required: 4,
                got: 0,
            });
        }
        let mr = self.positions.iter().map(|p| p[0]).sum::<f64>() / n;
        let mc = self.positions.iter().map(|p| p[1]).sum::<f64>() / n;
        let (mut srr, mut scc, mut src) = (0.0, 0.0, 0.0);
        for p in &self.positions {
            let (a, b) = (p[0] - mr, p[1] - mc);
            srr += a * a;
            scc += b * b;
            src += a * b;
        }
        let det = srr * scc - src * src;
        let scale = (srr + scc).powi(2);
        if scale == 0.0 || det <= 1e-12 * scale {
            return Err(Error::DegenerateGeometry("anchors are collinear".into()));
        }
        Ok(())
    }
}

/// Linearized lateration against the last anchor, optionally weighted.
fn lateration(
    obs: &RssObservations,
    model: &PathlossModel,
    weighted: bool,
    method: Method,
) -> Result<Estimate> {
    model.validate()?;
    obs.require(4)?;
    let m = obs.len();
    let d: Vec<f64> = obs
        .rss
        .iter()
        .map(|&y| model.invert(y) / obs.cell_size)
        .collect();
    let last = obs.positions[m - 1];
    let k_last = last[0] * last[0] + last[1] * last[1];
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..m - 1 {
        let p = obs.positions[i];
        let row = [2.0 * (last[0] - p[0]), 2.0 * (last[1] - p[1])];
        let rhs = d[i] * d[i] - d[m - 1] * d[m - 1] - (p[0] * p[0] + p[1] * p[1]) + k_last;
        let w = if weighted { 1.0 / (d[i] * d[i]) } else { 1.0 };
        a11 += w * row[0] * row[0];
        a12 += w * row[0] * row[1];
        a22 += w * row[1] * row[1];
        b1 += w * row[0] * rhs;
        b2 += w * row[1] * rhs;
    }
    let det = a11 * a22 - a12 * a12;
    if !(det.abs() > 1e-12 * (a11 + a22).powi(2)) {
        return Err(Error::SingularSystem(
            "lateration system is rank deficient".into(),
        ));
    }
    let row = (a22 * b1 - a12 * b2) / det;
    let col = (a11 * b2 - a12 * b1) / det;
    if !(row.is_finite() && col.is_finite()) {
        return Err(Error::SingularSystem(
            "non-finite lateration solution".into(),
        ));
    }
    Ok(Estimate::new(row, col, method).clamped(obs.dim))
}

pub fn ls_localize(obs: &RssObservations, model: &PathlossModel) -> Result<Estimate> {
    lateration(obs, model, false, Method::Ls)
}

/// Weights 1/d̂², trusting near anchors more.
pub fn awls_localize(obs: &RssObservations, model: &PathlossModel) -> Result<Estimate> {
    lateration(obs, model, true, Method::Awls)
}

/// Inclusive P0 search range in dB, stepped by 1 dB.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct P0Grid {
    pub min: f64,
    pub max: f64,
}

impl P0Grid {
    fn values(&self) -> Vec<f64> {
        let steps = (self.max - self.min).floor().max(0.0) as usize;
        (0..=steps).map(|k| self.min + k as f64).collect()
    }
}

/// Grid maximum-likelihood under Gaussian RSS noise and a uniform prior over
/// `candidates`. With `p0_grid` the reference power is maximized jointly.
pub fn mbe_localize(
    obs: &RssObservations,
    model: &PathlossModel,
    candidates: &[GridPoint],
    noise_std: f64,
    p0_grid: Option<P0Grid>,
) -> Result<Estimate> {
    model.validate()?;
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if !(noise_std > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise std {noise_std} must be positive"
        )));
    }
    let p0s = p0_grid.map_or_else(|| vec![model.p0], |g| g.values());
    let denom = 2.0 * noise_std * noise_std;
    let mut best: Option<(GridPoint, f64)> = None;
    for &cand in candidates {
        let x = [cand.row as f64, cand.col as f64];
        for &p0 in &p0s {
            let m = PathlossModel { p0, ..*model };
            let ll: f64 = -(0..obs.len())
                .map(|i| (obs.rss[i] - m.mean_rss(obs.distance_m(i, x))).powi(2))
                .sum::<f64>()
                / denom;
            if best.is_none_or(|(_, b)| ll > b) {
                best = Some((cand, ll));
            }
        }
    }
    let (p, _) = best.expect("nonempty candidates");
    Ok(Estimate::new(p.row as f64, p.col as f64, Method::Mbe))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NlsFit {
    pub estimate: Estimate,
    pub p0: f64,
    /// Sum of squared residuals, dB².
    pub cost: f64,
    pub iterations: usize,
}

fn nls_cost(obs: &RssObservations, model: &PathlossModel, theta: &Vector3<f64>) -> f64 {
    let m = PathlossModel {
        p0: theta[2],
        ..*model
    };
    (0..obs.len())
        .map(|i| (obs.rss[i] - m.mean_rss(obs.distance_m(i, [theta[0], theta[1]]))).powi(2))
        .sum()
}

fn nls_from(obs: &RssObservations, model: &PathlossModel, start: [f64; 2]) -> NlsFit {
    let n10 = 10.0 * model.exponent;
    // Closed-form P0 for the starting position.
    let p0 = (0..obs.len())
        .map(|i| {
            obs.rss[i]
                + n10
                    * (obs.distance_m(i, start).max(model.reference_distance)
                        / model.reference_distance)
                        .log10()
        })
        .sum::<f64>()
        / obs.len() as f64;
    let mut theta = Vector3::new(start[0], start[1], p0);
    let mut cost = nls_cost(obs, model, &theta);
    let mut lambda = NLS_INITIAL_DAMPING;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < NLS_MAX_ITERATIONS {
        iterations += 1;
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        let m = PathlossModel {
            p0: theta[2],
            ..*model
        };
        for i in 0..obs.len() {
            let p = obs.positions[i];
            let (dr, dc) = (theta[0] - p[0], theta[1] - p[1]);
            let d_cells2 = dr * dr + dc * dc;
            let d_m = d_cells2.sqrt() * obs.cell_size;
            let resid = obs.rss[i] - m.mean_rss(d_m);
            // Gradient of the mean with respect to (row, col, P0).
            let g = if d_m > model.reference_distance {
                let k = -n10 / (LN_10 * d_cells2);
                Vector3::new(k * dr, k * dc, 1.0)
            } else {
                Vector3::new(0.0, 0.0, 1.0)
            };
            jtj += g * g.transpose();
            jtr += g * resid;
        }
        let mut a = jtj;
        for k in 0..3 {
            a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
        }
        let Some(step) = a.lu().solve(&jtr) else {
            lambda *= 10.0;
            continue;
        };
        let candidate = theta + step;
        let new_cost = nls_cost(obs, model, &candidate);
        let step_norm = step.norm();
        if new_cost < cost {
            theta = candidate;
            cost = new_cost;
            lambda /= 10.0;
        } else {
            lambda *= 10.0;
        }
        if step_norm < NLS_STEP_TOLERANCE {
            converged = true;
            break;
        }
    }
    let mut estimate = Estimate::new(theta[0], theta[1], Method::Nls).clamped(obs.dim);
    estimate.converged = converged;
    NlsFit {
        estimate,
        p0: theta[2],
        cost,
        iterations,
    }
}

/// Levenberg–Marquardt over (row, col, P0) with the exponent fixed, from the
/// sensing-region centroid and the four quadrant centres; the lowest cost
/// wins, earlier starts on ties.
pub fn nls_fit(obs: &RssObservations, model0: &PathlossModel, exec: Exec) -> Result<NlsFit> {
    model0.validate()?;
    obs.check_spread()?;
    obs.require(4)?;
    let (rows, cols) = (obs.dim.0 as f64, obs.dim.1 as f64);
    let starts = [
        obs.sensing_centroid,
        [rows / 4.0, cols / 4.0],
        [rows / 4.0, 3.0 * cols / 4.0],
        [3.0 * rows / 4.0, cols / 4.0],
        [3.0 * rows / 4.0, 3.0 * cols / 4.0],
    ];
    let fits = exec.map(starts.len(), |k| nls_from(obs, model0, starts[k]));
    let mut best = fits[0];
    for f in &fits[1..] {
        if f.cost < best.cost {
            best = *f;
        }
    }
    Ok(best)
}

pub fn nls_localize(obs: &RssObservations, model0: &PathlossModel) -> Result<Estimate> {
    nls_localize_with(obs, model0, Exec::default())
}

pub fn nls_localize_with(
    obs: &RssObservations,
    model0: &PathlossModel,
    exec: Exec,
) -> Result<Estimate> {
    Ok(nls_fit(obs, model0, exec)?.estimate)
}
