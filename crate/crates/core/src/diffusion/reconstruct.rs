//! Conditional radio-map reconstruction by an ensemble of reverse chains.

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::features::ConditionContext;
use super::{run_chain, standard_normal_field, Denoiser, DiffusionSchedule};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::propagation::RadioMap;
use crate::seed;

#[derive(Clone, Copy, Debug)]
pub struct ReconstructOptions {
    /// Re-impose the measured levels at mask cells after every step.
    pub data_consistency: bool,
    pub exec: Exec,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            data_consistency: true,
            exec: Exec::default(),
        }
    }
}

/// Measurements only fix levels relative to the strongest one, so the
/// absolute level comes from the denoiser: the offset that best matches its
/// clean-field estimate at the mask cells.
fn project_measurements(
    x: &mut Array2<f64>,
    t: f64,
    x0_hat: &Array2<f64>,
    meas: &[(crate::geometry::GridPoint, f64)],
    seed: u64,
) {
    if meas.is_empty() {
        return;
    }
    let anchor = meas
        .iter()
        .map(|&(p, rel)| x0_hat[[p.row, p.col]] - rel)
        .sum::<f64>()
        / meas.len() as f64;
    let mut rng = seed::rng(seed);
    let s = t.sqrt();
    for &(p, rel) in meas {
        let clean = anchor + rel;
        x[[p.row, p.col]] = if t > 0.0 {
            (1.0 - t) * clean + s * rng.sample::<f64, _>(StandardNormal)
        } else {
            clean
        };
    }
}

/// `ensemble` independent conditional samples, each a gain-domain map with
/// building cells at 0.
pub fn reconstruct_rm<D: Denoiser + ?Sized>(
    ctx: &ConditionContext,
    denoiser: &D,
    schedule: &DiffusionSchedule,
    ensemble: usize,
    seed: u64,
    opts: &ReconstructOptions,
) -> Result<Vec<RadioMap>> {
    if ensemble == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let dim = ctx.dim();
    opts.exec.try_map(ensemble, |k| {
        let member = seed::derive(seed, k as u64);
        let start = standard_normal_field(dim, seed::derive(member, 0));
        let mut values = run_chain(
            start,
            denoiser,
            Some(ctx),
            schedule,
            seed::derive(member, 1),
            |state, out, s| {
                if opts.data_consistency {
                    project_measurements(&mut state.x, state.t, &out.x0_hat, &ctx.measurements, s);
                }
            },
        )?;
        for ((r, c), v) in values.indexed_iter_mut() {
            if ctx.occupancy[[r, c]] {
                *v = 0.0;
            }
        }
        Ok(RadioMap {
            values,
            tx: None,
            normalized: true,
            params: ctx.params,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::OracleDenoiser;
    use crate::geometry::{EnvironmentGrid, GridPoint};
    use crate::propagation::{synthesize_radio_map, PropagationParams};
    use crate::sampling::{random_mask, sample_rss};

    fn scene() -> (EnvironmentGrid, RadioMap, ConditionContext) {
        let mut occ = Array2::from_elem((20, 20), false);
        for r in 12..15 {
            for c in 4..9 {
                occ[[r, c]] = true;
            }
        }
        let env = EnvironmentGrid::with_defaults(occ).unwrap();
        let params = PropagationParams::default();
        let rm = synthesize_radio_map(&env, GridPoint::new(16, 12), &params).unwrap();
        let mask = random_mask(&env, 15, 3).unwrap();
        let m = sample_rss(&rm, &mask, 0.0, 1).unwrap();
        let ctx = ConditionContext::from_measurements(&env, &m, &params).unwrap();
        (env.clone(), rm.normalized(&env), ctx)
    }

    #[test]
    fn single_member_matches_a_plain_chain_without_projection() {
        let (_, truth, ctx) = scene();
        let oracle = OracleDenoiser {
            x0: truth.values.clone(),
        };
        let sched = DiffusionSchedule::uniform(20).unwrap();
        let opts = ReconstructOptions {
            data_consistency: false,
            exec: Exec::Sequential,
        };
        let maps = reconstruct_rm(&ctx, &oracle, &sched, 1, 4, &opts).unwrap();
        let member = seed::derive(4, 0);
        let start = standard_normal_field(ctx.dim(), seed::derive(member, 0));
        let plain = super::super::reverse_chain(
            &start,
            &oracle,
            Some(&ctx),
            &sched,
            seed::derive(member, 1),
        )
        .unwrap();
        let mut expected = plain;
        for ((r, c), v) in expected.indexed_iter_mut() {
            if ctx.occupancy[[r, c]] {
                *v = 0.0;
            }
        }
        assert_eq!(maps[0].values, expected);
    }

    #[test]
    fn projection_imposes_measured_levels() {
        let (_, truth, ctx) = scene();
        let oracle = OracleDenoiser {
            x0: truth.values.clone(),
        };
        let sched = DiffusionSchedule::uniform(30).unwrap();
        let maps =
            reconstruct_rm(&ctx, &oracle, &sched, 3, 8, &ReconstructOptions::default()).unwrap();
        for map in &maps {
            let anchor = map.values[[ctx.measurements[0].0.row, ctx.measurements[0].0.col]]
                - ctx.measurements[0].1;
            for &(p, rel) in &ctx.measurements {
                let expected = (anchor + rel).clamp(0.0, 1.0);
                assert!((map.values[[p.row, p.col]] - expected).abs() < 1e-12);
                assert!((map.values[[p.row, p.col]] - truth.values[[p.row, p.col]]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn ensembles_are_reproducible_and_executor_independent() {
        let (_, truth, ctx) = scene();
        let oracle = OracleDenoiser {
            x0: truth.values.clone(),
        };
        let sched = DiffusionSchedule::uniform(10).unwrap();
        let seq = ReconstructOptions {
            data_consistency: true,
            exec: Exec::Sequential,
        };
        let par = ReconstructOptions {
            exec: Exec::Parallel,
            ..seq
        };
        let a = reconstruct_rm(&ctx, &oracle, &sched, 4, 2, &seq).unwrap();
        let b = reconstruct_rm(&ctx, &oracle, &sched, 4, 2, &par).unwrap();
        assert_eq!(a, b);
        assert!(reconstruct_rm(&ctx, &oracle, &sched, 0, 2, &seq).is_err());
    }
}
