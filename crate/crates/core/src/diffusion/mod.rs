//! Decoupled diffusion with a constant drift that removes the clean field
//! over the unit horizon: q(x_t | x_0) = N((1 − t)·x_0, t·I).

mod features;
mod reconstruct;
mod ridge;

pub use features::{ConditionContext, CONDITION_PLANES};
pub use reconstruct::{reconstruct_rm, ReconstructOptions};
pub use ridge::{train_ridge_denoiser, RidgeDenoiserModel, RidgeTrainingOptions, TrainingExample};

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seed;

/// Terminal time of the reverse chain; the step that reaches it is taken all
/// the way to zero without injected noise.
pub const EPS_MIN: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Drift {
    /// f_t = −x_0 on [0, 1].
    #[default]
    ConstantToZero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionSchedule {
    t_grid: Vec<f64>,
    pub drift: Drift,
}

impl DiffusionSchedule {
    /// Uniform grid from 1 down to [`EPS_MIN`] in `num_steps` steps.
    pub fn uniform(num_steps: usize) -> Result<Self> {
        Self::uniform_to(num_steps, EPS_MIN)
    }

    pub fn uniform_to(num_steps: usize, eps_min: f64) -> Result<Self> {
        if num_steps == 0 {
            return Err(Error::InvalidParameter(
                "schedule needs at least one step".into(),
            ));
        }
        if !(eps_min > 0.0 && eps_min < 1.0) {
            return Err(Error::BadTimestep(format!(
                "terminal time {eps_min} outside (0, 1)"
            )));
        }
        let span = 1.0 - eps_min;
        let t_grid = (0..=num_steps)
            .map(|k| {
                if k == num_steps {
                    eps_min
                } else {
                    1.0 - k as f64 * span / num_steps as f64
                }
            })
            .collect();
        Self::from_grid(t_grid)
    }

    /// Explicit grid: starts at 1, strictly decreasing, ends above 0.
    pub fn from_grid(t_grid: Vec<f64>) -> Result<Self> {
        if t_grid.len() < 2 {
            return Err(Error::InvalidParameter(
                "schedule needs at least one step".into(),
            ));
        }
        if t_grid[0] != 1.0 {
            return Err(Error::BadTimestep(format!(
                "schedule starts at {} not 1",
                t_grid[0]
            )));
        }
        if t_grid.windows(2).any(|w| !(w[1] < w[0])) || !(t_grid[t_grid.len() - 1] > 0.0) {
            return Err(Error::BadTimestep(
                "schedule must decrease strictly inside (0, 1]".into(),
            ));
        }
        Ok(Self {
            t_grid,
            drift: Drift::ConstantToZero,
        })
    }

    pub fn num_steps(&self) -> usize {
        self.t_grid.len() - 1
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    /// (t, Δt) per step. The last step uses Δt = t so the chain lands on 0.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.num_steps();
        (0..n)
            .map(|k| {
                let t = self.t_grid[k];
                let dt = if k + 1 == n {
                    t
                } else {
                    t - self.t_grid[k + 1]
                };
                (t, dt)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionState {
    pub x: Array2<f64>,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenoiserOutput {
    pub x0_hat: Array2<f64>,
    pub eps_hat: Array2<f64>,
}

/// Estimates the clean field and the noise from a diffusion state.
pub trait Denoiser: Sync {
    fn denoise(
        &self,
        state: &DiffusionState,
        cond: Option<&ConditionContext>,
    ) -> Result<DenoiserOutput>;
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::BadTimestep(format!("t = {t} outside (0, 1]")));
    }
    Ok(())
}

pub(crate) fn standard_normal_field(dim: (usize, usize), seed: u64) -> Array2<f64> {
    let mut rng = seed::rng(seed);
    Array2::from_shape_simple_fn(dim, || rng.sample::<f64, _>(StandardNormal))
}

/// x_t = (1 − t)·x_0 + √t·ε.
pub fn forward_sample(x0: &Array2<f64>, t: f64, seed: u64) -> Result<DiffusionState> {
    check_t(t)?;
    let eps = standard_normal_field(x0.dim(), seed);
    Ok(forward_with_noise(x0, t, &eps))
}

pub(crate) fn forward_with_noise(x0: &Array2<f64>, t: f64, eps: &Array2<f64>) -> DiffusionState {
    let a = 1.0 - t;
    let s = t.sqrt();
    let mut x = x0.mapv(|v| a * v);
    x.zip_mut_with(eps, |xv, &e| *xv += s * e);
    DiffusionState { x, t }
}

/// Knows the clean field and returns the exact noise consistent with it.
#[derive(Clone, Debug)]
pub struct OracleDenoiser {
    pub x0: Array2<f64>,
}

impl Denoiser for OracleDenoiser {
    fn denoise(
        &self,
        state: &DiffusionState,
        _cond: Option<&ConditionContext>,
    ) -> Result<DenoiserOutput> {
        check_t(state.t)?;
        if state.x.dim() != self.x0.dim() {
            return Err(Error::ShapeMismatch {
                expected: self.x0.dim(),
                actual: state.x.dim(),
            });
        }
        let a = 1.0 - state.t;
        let s = state.t.sqrt();
        let mut eps_hat = state.x.clone();
        eps_hat.zip_mut_with(&self.x0, |e, &x0| *e = (*e - a * x0) / s);
        Ok(DenoiserOutput {
            x0_hat: self.x0.clone(),
            eps_hat,
        })
    }
}

/// x_{t−Δt} = x_t + Δt·x0_hat − (Δt/√t)·eps_hat + √(Δt(t−Δt)/t)·z.
pub fn reverse_step(
    state: &DiffusionState,
    out: &DenoiserOutput,
    dt: f64,
    seed: u64,
) -> Result<DiffusionState> {
    check_t(state.t)?;
    if !(dt >= 0.0) || dt > state.t {
        return Err(Error::BadTimestep(format!(
            "step {dt} must lie in [0, t] with t = {}",
            state.t
        )));
    }
    for f in [&out.x0_hat, &out.eps_hat] {
        if f.dim() != state.x.dim() {
            return Err(Error::ShapeMismatch {
                expected: state.x.dim(),
                actual: f.dim(),
            });
        }
    }
    let t = state.t;
    let t_next = if dt == t { 0.0 } else { t - dt };
    let var = dt * t_next / t;
    let k_eps = dt / t.sqrt();
    let mut x = state.x.clone();
    ndarray::Zip::from(&mut x)
        .and(&out.x0_hat)
        .and(&out.eps_hat)
        .for_each(|xv, &x0, &e| *xv += dt * x0 - k_eps * e);
    if var > 0.0 {
        let sd = var.sqrt();
        let z = standard_normal_field(x.dim(), seed);
        x.zip_mut_with(&z, |xv, &zv| *xv += sd * zv);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("reverse step"));
    }
    Ok(DiffusionState { x, t: t_next })
}

/// Runs the reverse chain, calling `project` after every step with the new
/// state, the denoiser output that produced it and a per-step seed.
pub(crate) fn run_chain<D, P>(
    x_start: Array2<f64>,
    denoiser: &D,
    cond: Option<&ConditionContext>,
    schedule: &DiffusionSchedule,
    seed: u64,
    mut project: P,
) -> Result<Array2<f64>>
where
    D: Denoiser + ?Sized,
    P: FnMut(&mut DiffusionState, &DenoiserOutput, u64),
{
    let mut state = DiffusionState { x: x_start, t: 1.0 };
    for (k, (t, dt)) in schedule.steps().into_iter().enumerate() {
        state.t = t;
        let out = denoiser.denoise(&state, cond)?;
        let step_seed = seed::derive(seed, 2 * k as u64);
        state = reverse_step(&state, &out, dt, step_seed)?;
        project(&mut state, &out, seed::derive(seed, 2 * k as u64 + 1));
    }
    Ok(state.x.mapv(|v| v.clamp(0.0, 1.0)))
}

/// Reverse chain from `x_start` at t = 1, clipped to [0, 1].
pub fn reverse_chain<D: Denoiser + ?Sized>(
    x_start: &Array2<f64>,
    denoiser: &D,
    cond: Option<&ConditionContext>,
    schedule: &DiffusionSchedule,
    seed: u64,
) -> Result<Array2<f64>> {
    run_chain(
        x_start.clone(),
        denoiser,
        cond,
        schedule,
        seed,
        |_, _, _| {},
    )
}
