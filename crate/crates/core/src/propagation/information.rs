//! How much a set of probe positions can tell about the field on a
//! discretized diffracting edge: the Kirchhoff–Helmholtz observation matrix,
//! its Fisher information, the Gaussian-prior mutual information, and greedy
//! probe placement on top of it.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// PSD tolerance on the prior covariance eigenvalues.
pub const PSD_TOLERANCE: f64 = -1e-10;

pub type Point2 = [f64; 2];

fn sub(a: Point2, b: Point2) -> Point2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: Point2, b: Point2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: Point2) -> f64 {
    a[0].hypot(a[1])
}

fn unit(a: Point2) -> Result<Point2> {
    let n = norm(a);
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::InvalidGeometry("zero-length direction".into()));
    }
    Ok([a[0] / n, a[1] / n])
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeSegment {
    /// Signed arc position of the segment center relative to the apex.
    pub s: f64,
    pub length: f64,
    pub center: Point2,
}

/// A straight diffracting edge cut into segments, with the incident wave,
/// the observation noise level and a Gaussian prior over the segment fields.
#[derive(Clone, Debug)]
pub struct EdgeDiscretization {
    pub segments: Vec<EdgeSegment>,
    /// Unit normal of the edge pointing into the observation half-plane.
    pub normal: Point2,
    /// Unit propagation direction of the incident wave.
    pub incident: Point2,
    pub wavenumber: f64,
    pub sigma: f64,
    pub prior_cov: DMatrix<Complex64>,
}

impl EdgeDiscretization {
    /// Split `start → end` into `count` equal segments. Arc positions are
    /// measured from `apex` projected onto the edge. The prior is the
    /// exponential kernel exp(−|s_j − s_k| / ℓ).
    #[allow(clippy::too_many_arguments)]
    pub fn straight(
        start: Point2,
        end: Point2,
        apex: Point2,
        count: usize,
        normal: Point2,
        incident: Point2,
        wavelength: f64,
        sigma: f64,
        correlation_length: f64,
    ) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidGeometry(
                "edge needs at least one segment".into(),
            ));
        }
        if !(wavelength > 0.0 && sigma > 0.0 && correlation_length > 0.0) {
            return Err(Error::InvalidGeometry(
                "wavelength, sigma and correlation length must be positive".into(),
            ));
        }
        let dir = unit(sub(end, start))?;
        let total = norm(sub(end, start));
        let step = total / count as f64;
        let s0 = dot(sub(apex, start), dir);
        let segments: Vec<EdgeSegment> = (0..count)
            .map(|j| {
                let along = (j as f64 + 0.5) * step;
                EdgeSegment {
                    s: along - s0,
                    length: step,
                    center: [start[0] + dir[0] * along, start[1] + dir[1] * along],
                }
            })
            .collect();
        let prior_cov = exponential_prior(&segments, correlation_length);
        Ok(Self {
            segments,
            normal: unit(normal)?,
            incident: unit(incident)?,
            wavenumber: 2.0 * PI / wavelength,
            sigma,
            prior_cov,
        })
    }

    pub fn with_prior(mut self, prior_cov: DMatrix<Complex64>) -> Self {
        self.prior_cov = prior_cov;
        self
    }
}

/// C_jk = exp(−|s_j − s_k| / ℓ).
pub fn exponential_prior(segments: &[EdgeSegment], correlation_length: f64) -> DMatrix<Complex64> {
    let n = segments.len();
    DMatrix::from_fn(n, n, |j, k| {
        Complex64::new(
            (-(segments[j].s - segments[k].s).abs() / correlation_length).exp(),
            0.0,
        )
    })
}

/// K_ij = (Δs_j / 2π)·[cos θ_i + cos θ_d]·e^{jkr_ij} / r_ij for probes i and
/// segments j.
pub fn kirchhoff_matrix(
    disc: &EdgeDiscretization,
    probes: &[Point2],
) -> Result<DMatrix<Complex64>> {
    let cos_inc = dot(disc.incident, disc.normal);
    let mut k = DMatrix::zeros(probes.len(), disc.segments.len());
    for (i, &p) in probes.iter().enumerate() {
        for (j, seg) in disc.segments.iter().enumerate() {
            let v = sub(p, seg.center);
            let r = norm(v);
            if r < 1e-12 {
                return Err(Error::DegenerateGeometry(format!(
                    "probe {i} coincides with segment {j}"
                )));
            }
            let cos_diff = dot(v, disc.normal) / r;
            let amp = seg.length / (2.0 * PI) * (cos_inc + cos_diff) / r;
            k[(i, j)] = Complex64::from_polar(amp, disc.wavenumber * r);
        }
    }
    Ok(k)
}

/// J = σ⁻² KᴴK.
pub fn fisher_information(k: &DMatrix<Complex64>, sigma: f64) -> Result<DMatrix<Complex64>> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    Ok(k.adjoint() * k / Complex64::new(sigma * sigma, 0.0))
}

/// Reject covariances that are not Hermitian or have eigenvalues below
/// [`PSD_TOLERANCE`].
pub fn check_psd(c: &DMatrix<Complex64>) -> Result<()> {
    if !c.is_square() {
        return Err(Error::NotPsd {
            min_eigenvalue: f64::NAN,
        });
    }
    let scale = c.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let n = c.nrows();
    for i in 0..n {
        for j in i..n {
            if (c[(i, j)] - c[(j, i)].conj()).norm() > 1e-10 * scale {
                return Err(Error::NotPsd {
                    min_eigenvalue: f64::NAN,
                });
            }
        }
    }
    if n == 0 {
        return Ok(());
    }
    let min = c
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min < PSD_TOLERANCE {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    Ok(())
}

/// I(u; y) = ½ log det(I + σ⁻² K C Kᴴ), in nats.
pub fn mutual_information(
    k: &DMatrix<Complex64>,
    c: &DMatrix<Complex64>,
    sigma: f64,
) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if c.nrows() != k.ncols() {
        return Err(Error::ShapeMismatch {
            expected: (k.ncols(), k.ncols()),
            actual: c.shape(),
        });
    }
    check_psd(c)?;
    Ok(mi_unchecked(k, c, sigma))
}

fn mi_unchecked(k: &DMatrix<Complex64>, c: &DMatrix<Complex64>, sigma: f64) -> f64 {
    let rows = k.nrows();
    if rows == 0 {
        return 0.0;
    }
    let mut m = k * c * k.adjoint() / Complex64::new(sigma * sigma, 0.0);
    for i in 0..rows {
        m[(i, i)] += Complex64::new(1.0, 0.0);
    }
    // Re-symmetrize against round-off before factoring.
    let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    match m.clone().cholesky() {
        Some(ch) => {
            let l = ch.l();
            (0..rows).map(|i| l[(i, i)].re.ln()).sum::<f64>()
        }
        None => {
            // I + PSD is PD; only reachable through severe round-off.
            0.5 * m
                .symmetric_eigenvalues()
                .iter()
                .map(|&e| e.max(f64::MIN_POSITIVE).ln())
                .sum::<f64>()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GreedyPlacement {
    /// Candidate indices in selection order.
    pub order: Vec<usize>,
    /// Mutual information after each selection.
    pub cumulative_mi: Vec<f64>,
}

impl GreedyPlacement {
    /// Marginal gain of each step.
    pub fn gains(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.cumulative_mi
            .iter()
            .map(|&v| {
                let g = v - prev;
                prev = v;
                g
            })
            .collect()
    }
}

/// Mutual information of the probe subset `rows` of a precomputed K.
pub fn subset_mutual_information(
    k: &DMatrix<Complex64>,
    c: &DMatrix<Complex64>,
    sigma: f64,
    rows: &[usize],
) -> f64 {
    let sub = k.select_rows(rows.iter());
    mi_unchecked(&sub, c, sigma)
}

/// Repeatedly add the candidate with the largest mutual-information gain;
/// ties go to the lowest candidate index.
pub fn greedy_probe_placement(
    candidates: &[Point2],
    disc: &EdgeDiscretization,
    budget: usize,
) -> Result<GreedyPlacement> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if budget > candidates.len() {
        return Err(Error::BudgetTooLarge {
            requested: budget,
            available: candidates.len(),
        });
    }
    check_psd(&disc.prior_cov)?;
    let k = kirchhoff_matrix(disc, candidates)?;
    let mut chosen: Vec<usize> = Vec::with_capacity(budget);
    let mut remaining: Vec<usize> = (0..candidates.len()).collect();
    let mut cumulative = Vec::with_capacity(budget);
    for _ in 0..budget {
        let mut best: Option<(usize, f64)> = None;
        for (slot, &cand) in remaining.iter().enumerate() {
            let mut rows = chosen.clone();
            rows.push(cand);
            let mi = subset_mutual_information(&k, &disc.prior_cov, disc.sigma, &rows);
            if best.is_none_or(|(_, v)| mi > v) {
                best = Some((slot, mi));
            }
        }
        let (slot, mi) = best.expect("remaining is nonempty while budget lasts");
        chosen.push(remaining.remove(slot));
        cumulative.push(mi);
    }
    Ok(GreedyPlacement {
        order: chosen,
        cumulative_mi: cumulative,
    })
}
