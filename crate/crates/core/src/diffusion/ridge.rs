//! Closed-form denoiser: one ridge regression per timestep bucket mapping a
//! local feature patch to the (clean value, noise) pair at the centre pixel.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::Rng as _;

use super::features::{ConditionContext, CONDITION_PLANES};
use super::{
    forward_with_noise, standard_normal_field, Denoiser, DenoiserOutput, DiffusionState, EPS_MIN,
};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::seed;

const MAGIC: &[u8; 4] = b"RDLD";
const FORMAT_VERSION: u32 = 1;
const OUTPUTS: usize = 2;

#[derive(Clone, Debug)]
pub struct TrainingExample {
    pub context: ConditionContext,
    /// Clean gain-domain map.
    pub x0: Array2<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct RidgeTrainingOptions {
    pub patch_radius: usize,
    /// Penalty per training sample.
    pub ridge_lambda: f64,
    pub buckets: usize,
    /// Free pixels drawn (with replacement) per example and bucket.
    pub pixels_per_example: usize,
    pub exec: Exec,
}

impl Default for RidgeTrainingOptions {
    fn default() -> Self {
        Self {
            patch_radius: 2,
            ridge_lambda: 1e-3,
            buckets: 10,
            pixels_per_example: 256,
            exec: Exec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RidgeDenoiserModel {
    pub patch_radius: usize,
    pub ridge_lambda: f64,
    /// Uniform partition of (0, 1]; bucket b covers (edges[b], edges[b+1]].
    pub bucket_edges: Vec<f64>,
    pub feature_dim: usize,
    /// One `feature_dim × 2` row-major block per bucket.
    pub weights: Vec<Vec<f64>>,
}

pub fn feature_dim(patch_radius: usize) -> usize {
    let side = 2 * patch_radius + 1;
    (1 + CONDITION_PLANES) * side * side + 3
}

fn uniform_edges(buckets: usize) -> Vec<f64> {
    (0..=buckets).map(|b| b as f64 / buckets as f64).collect()
}

/// Writes the features of pixel (r, c) into `out`; outside the grid reads 0.
fn fill_features(
    out: &mut [f64],
    x: &Array2<f64>,
    t: f64,
    ctx: &ConditionContext,
    r: usize,
    c: usize,
    radius: usize,
) {
    let (rows, cols) = x.dim();
    let rad = radius as isize;
    let mut k = 0;
    for plane in std::iter::once(x).chain(ctx.planes.iter()) {
        for dr in -rad..=rad {
            for dc in -rad..=rad {
                let rr = r as isize + dr;
                let cc = c as isize + dc;
                out[k] = if rr >= 0 && cc >= 0 && (rr as usize) < rows && (cc as usize) < cols {
                    plane[[rr as usize, cc as usize]]
                } else {
                    0.0
                };
                k += 1;
            }
        }
    }
    out[k] = x[[r, c]] / t.sqrt();
    out[k + 1] = t;
    out[k + 2] = 1.0;
}

fn check_context(ctx: &ConditionContext, dim: (usize, usize)) -> Result<()> {
    if ctx.dim() != dim || ctx.planes.len() != CONDITION_PLANES {
        return Err(Error::ShapeMismatch {
            expected: dim,
            actual: ctx.dim(),
        });
    }
    Ok(())
}

pub fn train_ridge_denoiser(
    data: &[TrainingExample],
    opts: &RidgeTrainingOptions,
    seed: u64,
) -> Result<RidgeDenoiserModel> {
    if data.is_empty() {
        return Err(Error::InvalidParameter("training set is empty".into()));
    }
    if opts.buckets == 0 || opts.pixels_per_example == 0 {
        return Err(Error::InvalidParameter(
            "buckets and pixels per example must be positive".into(),
        ));
    }
    if !(opts.ridge_lambda >= 0.0 && opts.ridge_lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "ridge lambda {} must be >= 0",
            opts.ridge_lambda
        )));
    }
    for ex in data {
        check_context(&ex.context, ex.x0.dim())?;
    }
    let dim = feature_dim(opts.patch_radius);
    let edges = uniform_edges(opts.buckets);
    let free: Vec<Vec<(usize, usize)>> = data
        .iter()
        .map(|ex| {
            ex.context
                .occupancy
                .indexed_iter()
                .filter(|(_, &b)| !b)
                .map(|(i, _)| i)
                .collect()
        })
        .collect();

    let weights = opts.exec.try_map(opts.buckets, |b| {
        let (lo, hi) = (edges[b], edges[b + 1]);
        let bucket_seed = seed::derive(seed, b as u64);
        let mut xtx = DMatrix::<f64>::zeros(dim, dim);
        let mut xty = DMatrix::<f64>::zeros(dim, OUTPUTS);
        let mut samples = 0usize;
        let n = opts.pixels_per_example;
        let mut x = DMatrix::<f64>::zeros(n, dim);
        let mut y = DMatrix::<f64>::zeros(n, OUTPUTS);
        let mut row = vec![0.0; dim];
        for (i, ex) in data.iter().enumerate() {
            if free[i].is_empty() {
                continue;
            }
            let ex_seed = seed::derive(bucket_seed, i as u64);
            let mut rng = seed::rng(seed::derive(ex_seed, 0));
            let t = (hi - (hi - lo) * rng.random::<f64>()).max(EPS_MIN);
            let eps = standard_normal_field(ex.x0.dim(), seed::derive(ex_seed, 1));
            let state = forward_with_noise(&ex.x0, t, &eps);
            for s in 0..n {
                let (r, c) = free[i][rng.random_range(0..free[i].len())];
                fill_features(&mut row, &state.x, t, &ex.context, r, c, opts.patch_radius);
                for (j, v) in row.iter().enumerate() {
                    x[(s, j)] = *v;
                }
                y[(s, 0)] = ex.x0[[r, c]];
                y[(s, 1)] = eps[[r, c]];
            }
            xtx.gemm_tr(1.0, &x, &x, 1.0);
            xty.gemm_tr(1.0, &x, &y, 1.0);
            samples += n;
        }
        let penalty = opts.ridge_lambda * samples as f64;
        for j in 0..dim {
            xtx[(j, j)] += penalty;
        }
        let chol = xtx.cholesky().ok_or_else(|| {
            Error::SingularSystem(format!(
                "bucket {b}: normal equations not positive definite"
            ))
        })?;
        let w = chol.solve(&xty);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem(format!(
                "bucket {b}: non-finite weights"
            )));
        }
        let mut block = vec![0.0; dim * OUTPUTS];
        for j in 0..dim {
            for o in 0..OUTPUTS {
                block[j * OUTPUTS + o] = w[(j, o)];
            }
        }
        Ok::<_, Error>(block)
    })?;

    Ok(RidgeDenoiserModel {
        patch_radius: opts.patch_radius,
        ridge_lambda: opts.ridge_lambda,
        bucket_edges: edges,
        feature_dim: dim,
        weights,
    })
}

impl RidgeDenoiserModel {
    pub fn buckets(&self) -> usize {
        self.weights.len()
    }

    pub fn bucket_of(&self, t: f64) -> usize {
        let b = (t * self.buckets() as f64).ceil() as usize;
        b.clamp(1, self.buckets()) - 1
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        for v in [
            FORMAT_VERSION,
            self.buckets() as u32,
            self.patch_radius as u32,
            self.feature_dim as u32,
        ] {
            out.write_all(&v.to_le_bytes())?;
        }
        out.write_all(&self.ridge_lambda.to_le_bytes())?;
        for block in &self.weights {
            for v in block {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input
            .read_exact(&mut magic)
            .map_err(|_| Error::ModelFormat("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(Error::ModelFormat("bad magic".into()));
        }
        let mut u32s = [0u32; 4];
        for v in &mut u32s {
            let mut b = [0u8; 4];
            input
                .read_exact(&mut b)
                .map_err(|_| Error::ModelFormat("truncated header".into()))?;
            *v = u32::from_le_bytes(b);
        }
        let [version, buckets, radius, dim] = u32s.map(|v| v as usize);
        if version != FORMAT_VERSION as usize {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        if buckets == 0 || dim != feature_dim(radius) {
            return Err(Error::ModelFormat(format!(
                "inconsistent header: {buckets} buckets, radius {radius}, feature dim {dim}"
            )));
        }
        let mut read_f64 = || -> Result<f64> {
            let mut b = [0u8; 8];
            input
                .read_exact(&mut b)
                .map_err(|_| Error::ModelFormat("truncated weights".into()))?;
            Ok(f64::from_le_bytes(b))
        };
        let ridge_lambda = read_f64()?;
        let mut weights = Vec::with_capacity(buckets);
        for _ in 0..buckets {
            let block = (0..dim * OUTPUTS)
                .map(|_| read_f64())
                .collect::<Result<Vec<_>>>()?;
            if block.iter().any(|v| !v.is_finite()) {
                return Err(Error::ModelFormat("non-finite weight".into()));
            }
            weights.push(block);
        }
        Ok(Self {
            patch_radius: radius,
            ridge_lambda,
            bucket_edges: uniform_edges(buckets),
            feature_dim: dim,
            weights,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        crate::dataio::write_atomic(path, &buf)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|_| Error::FileNotFound(path.to_path_buf()))?;
        Self::read_from(bytes.as_slice())
    }
}

impl Denoiser for RidgeDenoiserModel {
    fn denoise(
        &self,
        state: &DiffusionState,
        cond: Option<&ConditionContext>,
    ) -> Result<DenoiserOutput> {
        let ctx =
            cond.ok_or_else(|| Error::InvalidParameter("ridge denoiser needs a condition".into()))?;
        if !(state.t > 0.0 && state.t <= 1.0) {
            return Err(Error::BadTimestep(format!(
                "t = {} outside (0, 1]",
                state.t
            )));
        }
        check_context(ctx, state.x.dim())?;
        let w = &self.weights[self.bucket_of(state.t)];
        let dim = state.x.dim();
        let mut x0_hat = Array2::zeros(dim);
        let mut eps_hat = Array2::zeros(dim);
        let mut f = vec![0.0; self.feature_dim];
        for r in 0..dim.0 {
            for c in 0..dim.1 {
                fill_features(&mut f, &state.x, state.t, ctx, r, c, self.patch_radius);
                let (mut a, mut e) = (0.0, 0.0);
                for (j, v) in f.iter().enumerate() {
                    a += v * w[j * OUTPUTS];
                    e += v * w[j * OUTPUTS + 1];
                }
                x0_hat[[r, c]] = if ctx.occupancy[[r, c]] {
                    0.0
                } else {
                    a.clamp(0.0, 1.0)
                };
                eps_hat[[r, c]] = e;
            }
        }
        Ok(DenoiserOutput { x0_hat, eps_hat })
    }
}
