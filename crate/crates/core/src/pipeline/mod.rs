//! Experiment pipeline: each command reads the artifacts of the previous
//! one under the output directory and writes its own.
//!
//! ```text
//! out/
//!   manifest.csv                      synth
//!   scenes/<id>/{building,gain_tx0}.png
//!   samples/sampling.csv              sample
//!   samples/<strategy>/<id>/{mask.pgm,measurements.csv}
//!   model/ridge.rdld                  train
//!   recon/<strategy>/<id>/{members.bin,mean.png}
//!   estimates.csv                     localize
//!   eval/{metrics.csv,summary.txt}    evaluate
//!   analysis/<id>/{fisher,greedy}.csv analyze-sampling
//!   run_manifest.jsonl                every command
//! ```

mod artifacts;
mod config;

pub use artifacts::{
    read_map_stack, read_measurements, read_rows, write_map_stack, write_measurements, write_rows,
    EstimateRow, SamplingRow,
};
pub use config::{DenoiserKind, ExperimentConfig, RawConfig, SceneSourceKind, MAP_METRICS};

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array2;

use crate::dataio::{
    gain_png16, generate_synthetic_scene_with, load_building_map, load_gain_map, scene_dir,
    split_manifest, write_atomic, write_scene, DatasetManifest, ManifestEntry, SceneRecord,
    SceneSource, Split, SyntheticSceneOptions,
};
use crate::diffusion::{
    reconstruct_rm, train_ridge_denoiser, ConditionContext, Denoiser, DiffusionSchedule,
    OracleDenoiser, ReconstructOptions, RidgeDenoiserModel, RidgeTrainingOptions, TrainingExample,
};
use crate::error::{Error, Result};
use crate::exec::{with_workers, Exec};
use crate::geometry::{EnvironmentGrid, GridPoint};
use crate::localization::{
    argmax_localize, awls_localize, components, ensemble_localize, largest_blob_centroid,
    ls_localize, mbe_localize, nls_localize_with, threshold_region_center, topk_weighted_centroid,
    Estimate, Method, PathlossModel, RssObservations,
};
use crate::metrics::{localization_error, nmse, psnr, rmse, ssim, EvalReport};
use crate::propagation::{
    fisher_information, fresnel_zone_width, greedy_probe_placement, kirchhoff_matrix,
    synthesize_radio_map_with, EdgeDiscretization, RadioMap,
};
use crate::sampling::{
    budget_matched_random, edge_mask, hybrid_mask, random_mask, sample_rss, vertex_mask,
    write_mask_pgm, SamplingMask, SamplingStrategy,
};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Synth,
    Sample,
    Train,
    Reconstruct,
    Localize,
    Evaluate,
    AnalyzeSampling,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Synth,
        Command::Sample,
        Command::Train,
        Command::Reconstruct,
        Command::Localize,
        Command::Evaluate,
        Command::AnalyzeSampling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Sample => "sample",
            Command::Train => "train",
            Command::Reconstruct => "reconstruct",
            Command::Localize => "localize",
            Command::Evaluate => "evaluate",
            Command::AnalyzeSampling => "analyze-sampling",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown command {s:?}")))
    }
}

/// Runs one command inside a pool of `cfg.workers` threads and appends a
/// line to the run manifest.
pub fn run(cmd: Command, raw: &RawConfig) -> Result<()> {
    let cfg = raw.resolve()?;
    let start = Instant::now();
    with_workers(cfg.workers, || match cmd {
        Command::Synth => cmd_synth(&cfg),
        Command::Sample => cmd_sample(&cfg),
        Command::Train => cmd_train(&cfg),
        Command::Reconstruct => cmd_reconstruct(&cfg),
        Command::Localize => cmd_localize(&cfg),
        Command::Evaluate => cmd_evaluate(&cfg),
        Command::AnalyzeSampling => cmd_analyze_sampling(&cfg),
    })?;
    log_run(&cfg, raw, cmd, start.elapsed().as_millis())
}

/// Every command in pipeline order.
pub fn run_all(raw: &RawConfig) -> Result<()> {
    Command::ALL.into_iter().try_for_each(|c| run(c, raw))
}

fn log_run(cfg: &ExperimentConfig, raw: &RawConfig, cmd: Command, elapsed_ms: u128) -> Result<()> {
    let path = cfg.out.join("run_manifest.jsonl");
    let mut log = match std::fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let line = serde_json::json!({
        "command": cmd.name(),
        "config_hash": raw.hash(),
        "seed": cfg.seed,
        "workers": cfg.workers,
        "parallel": Exec::parallel_available(),
        "version": env!("CARGO_PKG_VERSION"),
        "elapsed_ms": elapsed_ms as u64,
    });
    serde_json::to_writer(&mut log, &line)?;
    log.push(b'\n');
    write_atomic(&path, &log)
}

fn manifest_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.join("manifest.csv")
}

/// Directory holding `scenes/<id>/` images.
fn scene_root(cfg: &ExperimentConfig) -> &Path {
    match (cfg.source, &cfg.dataset_dir) {
        (SceneSourceKind::Dataset, Some(d)) => d,
        _ => &cfg.out,
    }
}

fn synth_options(cfg: &ExperimentConfig) -> SyntheticSceneOptions {
    SyntheticSceneOptions {
        n: cfg.grid,
        min_buildings: cfg.min_buildings,
        max_buildings: cfg.max_buildings,
        restricted_rows: cfg.restricted_rows,
        params: cfg.params,
    }
}

pub fn cmd_synth(cfg: &ExperimentConfig) -> Result<()> {
    let manifest = match cfg.source {
        SceneSourceKind::Synthetic => {
            let opts = synth_options(cfg);
            let parent = seed::derive_named(cfg.seed, "synth");
            let scenes = Exec::default().try_map(cfg.scene_count, |i| {
                generate_synthetic_scene_with(
                    &opts,
                    &format!("scene_{i:04}"),
                    seed::derive(parent, i as u64),
                    Exec::Sequential,
                )
            })?;
            for s in &scenes {
                write_scene(&cfg.out, s)?;
            }
            let ids: Vec<String> = scenes.iter().map(|s| s.scene_id.clone()).collect();
            let (train, test) = split_manifest(
                &ids,
                cfg.train_count,
                cfg.test_count,
                seed::derive_named(cfg.seed, "split"),
            )?;
            let mut entries = Vec::new();
            for s in &scenes {
                let split = if train.contains(&s.scene_id) {
                    Split::Train
                } else if test.contains(&s.scene_id) {
                    Split::Test
                } else {
                    continue;
                };
                entries.push(ManifestEntry {
                    scene_id: s.scene_id.clone(),
                    tx_row: s.tx.row,
                    tx_col: s.tx.col,
                    split,
                });
            }
            DatasetManifest {
                entries,
                seed: cfg.seed,
            }
        }
        SceneSourceKind::Dataset => {
            let root = scene_root(cfg);
            let manifest = DatasetManifest::read(&root.join("manifest.csv"))?;
            for e in &manifest.entries {
                load_scene(cfg, e)?;
            }
            manifest
        }
    };
    write_atomic(&manifest_path(cfg), &manifest.to_csv()?)
}

fn read_manifest(cfg: &ExperimentConfig) -> Result<DatasetManifest> {
    DatasetManifest::read(&manifest_path(cfg))
}

/// Scene with its ground truth in dBm. Synthetic truth is re-synthesized
/// from the stored layout rather than read back from the quantized image.
pub fn load_scene(cfg: &ExperimentConfig, entry: &ManifestEntry) -> Result<SceneRecord> {
    let dir = scene_dir(scene_root(cfg), &entry.scene_id);
    let building = dir.join("building.png");
    if !building.exists() {
        return Err(Error::UpstreamArtifactMissing(building));
    }
    let synthetic = cfg.source == SceneSourceKind::Synthetic;
    let mut env = load_building_map(&building, synthetic || cfg.any_size)?;
    if let Some((a, b)) = cfg.restricted_rows {
        env = env.with_restricted_rows(a, b)?;
    }
    let tx = GridPoint::new(entry.tx_row, entry.tx_col);
    env.check_bounds(tx)?;
    if env.is_building(tx) {
        return Err(Error::TxInsideBuilding {
            row: tx.row,
            col: tx.col,
        });
    }
    let truth = if synthetic {
        synthesize_radio_map_with(&env, tx, &cfg.params, Exec::Sequential)?
    } else {
        let gain = dir.join("gain_tx0.png");
        if !gain.exists() {
            return Err(Error::UpstreamArtifactMissing(gain));
        }
        let mut rm = load_gain_map(&gain, cfg.any_size)?;
        rm.params = cfg.params;
        rm.tx = Some(tx);
        rm.to_dbm()
    };
    Ok(SceneRecord {
        scene_id: entry.scene_id.clone(),
        env,
        tx,
        ground_truth: Some(truth),
        source: if synthetic {
            SceneSource::Synthetic
        } else {
            SceneSource::Dataset
        },
    })
}

fn load_split(cfg: &ExperimentConfig, split: Split) -> Result<Vec<SceneRecord>> {
    let manifest = read_manifest(cfg)?;
    let entries: Vec<&ManifestEntry> = manifest
        .entries
        .iter()
        .filter(|e| e.split == split)
        .collect();
    Exec::default().try_map(entries.len(), |i| load_scene(cfg, entries[i]))
}

fn truth_of(rec: &SceneRecord) -> &RadioMap {
    rec.ground_truth
        .as_ref()
        .expect("pipeline scenes carry ground truth")
}

fn build_mask(
    cfg: &ExperimentConfig,
    env: &EnvironmentGrid,
    strategy: SamplingStrategy,
    mask_seed: u64,
) -> Result<SamplingMask> {
    match strategy {
        SamplingStrategy::Edge => Ok(edge_mask(env)),
        SamplingStrategy::Vertex => Ok(vertex_mask(env)),
        SamplingStrategy::Random => random_mask(
            env,
            cfg.random_budget.min(env.free_sensing_cells().len()),
            mask_seed,
        ),
        SamplingStrategy::Hybrid => hybrid_mask(env, cfg.hybrid_fraction, mask_seed),
        SamplingStrategy::BudgetMatchedRandom => {
            let reference = build_mask(cfg, env, cfg.matched_to, seed::derive(mask_seed, 1))?;
            budget_matched_random(env, &reference, mask_seed)
        }
    }
}

fn sample_dir(cfg: &ExperimentConfig, strategy: SamplingStrategy, id: &str) -> PathBuf {
    cfg.out.join("samples").join(strategy.name()).join(id)
}

fn recon_dir(cfg: &ExperimentConfig, strategy: SamplingStrategy, id: &str) -> PathBuf {
    cfg.out.join("recon").join(strategy.name()).join(id)
}

fn scene_seed(cfg: &ExperimentConfig, stage: &str, id: &str, strategy: SamplingStrategy) -> u64 {
    seed::derive_named(cfg.seed, &format!("{stage}/{id}/{}", strategy.name()))
}

pub fn cmd_sample(cfg: &ExperimentConfig) -> Result<()> {
    let scenes = load_split(cfg, Split::Test)?;
    let jobs: Vec<(usize, SamplingStrategy)> = (0..scenes.len())
        .flat_map(|i| cfg.strategies.iter().map(move |&s| (i, s)))
        .collect();
    let rows = Exec::default().try_map(jobs.len(), |j| {
        let (i, strategy) = jobs[j];
        let rec = &scenes[i];
        let s = scene_seed(cfg, "sample", &rec.scene_id, strategy);
        let mask = build_mask(cfg, &rec.env, strategy, seed::derive(s, 0))?;
        let m = sample_rss(truth_of(rec), &mask, cfg.noise_std, seed::derive(s, 1))?;
        let dir = sample_dir(cfg, strategy, &rec.scene_id);
        let mut pgm = Vec::new();
        write_mask_pgm(&mask.points, rec.env.dim(), &mut pgm)?;
        write_atomic(&dir.join("mask.pgm"), &pgm)?;
        write_measurements(&dir.join("measurements.csv"), &m)?;
        Ok::<_, Error>(SamplingRow {
            scene_id: rec.scene_id.clone(),
            strategy: strategy.name().to_string(),
            points: mask.len(),
            free_cells: rec.env.free_cell_count(),
            ratio: mask.sampling_ratio(&rec.env),
        })
    })?;
    write_rows(&cfg.out.join("samples").join("sampling.csv"), &rows)
}

fn model_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.join("model").join("ridge.rdld")
}

/// Training masks mix every structured strategy with random budgets so the
/// model sees both sparse and dense conditions.
const TRAINING_STRATEGIES: [SamplingStrategy; 4] = [
    SamplingStrategy::Edge,
    SamplingStrategy::Vertex,
    SamplingStrategy::Hybrid,
    SamplingStrategy::Random,
];

pub fn cmd_train(cfg: &ExperimentConfig) -> Result<()> {
    let scenes = load_split(cfg, Split::Train)?;
    if scenes.is_empty() {
        return Err(Error::ConfigInvalid(
            "training needs at least one train scene".into(),
        ));
    }
    let data = Exec::default().try_map(scenes.len() * TRAINING_STRATEGIES.len(), |j| {
        let rec = &scenes[j / TRAINING_STRATEGIES.len()];
        let strategy = TRAINING_STRATEGIES[j % TRAINING_STRATEGIES.len()];
        let s = scene_seed(cfg, "train", &rec.scene_id, strategy);
        let mask = build_mask(cfg, &rec.env, strategy, seed::derive(s, 0))?;
        let m = sample_rss(truth_of(rec), &mask, cfg.noise_std, seed::derive(s, 1))?;
        Ok::<_, Error>(TrainingExample {
            context: ConditionContext::from_measurements(&rec.env, &m, &cfg.params)?,
            x0: truth_of(rec).normalized(&rec.env).values,
        })
    })?;
    let opts = RidgeTrainingOptions {
        patch_radius: cfg.patch_radius,
        ridge_lambda: cfg.ridge_lambda,
        buckets: cfg.buckets,
        pixels_per_example: cfg.pixels_per_example,
        exec: Exec::default(),
    };
    let model = train_ridge_denoiser(&data, &opts, seed::derive_named(cfg.seed, "train"))?;
    model.save(&model_path(cfg))
}

fn context_for(
    cfg: &ExperimentConfig,
    rec: &SceneRecord,
    strategy: SamplingStrategy,
) -> Result<ConditionContext> {
    let path = sample_dir(cfg, strategy, &rec.scene_id).join("measurements.csv");
    let m = read_measurements(&path, strategy, cfg.noise_std)?;
    ConditionContext::from_measurements(&rec.env, &m, &cfg.params)
}

pub fn cmd_reconstruct(cfg: &ExperimentConfig) -> Result<()> {
    let scenes = load_split(cfg, Split::Test)?;
    let model = match cfg.denoiser {
        DenoiserKind::Ridge => {
            let p = model_path(cfg);
            if !p.exists() {
                return Err(Error::UpstreamArtifactMissing(p));
            }
            Some(RidgeDenoiserModel::load(&p)?)
        }
        _ => None,
    };
    let schedule = DiffusionSchedule::uniform(cfg.steps)?;
    let jobs: Vec<(usize, SamplingStrategy)> = (0..scenes.len())
        .flat_map(|i| cfg.strategies.iter().map(move |&s| (i, s)))
        .collect();
    // Scenes run in parallel; ensembles inside each stay sequential.
    Exec::default().try_map(jobs.len(), |j| {
        let (i, strategy) = jobs[j];
        let rec = &scenes[i];
        let ctx = context_for(cfg, rec, strategy)?;
        let s = scene_seed(cfg, "reconstruct", &rec.scene_id, strategy);
        let opts = ReconstructOptions {
            data_consistency: cfg.data_consistency,
            exec: Exec::Sequential,
        };
        let members: Vec<Array2<f64>> = match cfg.denoiser {
            DenoiserKind::None => vec![ctx.planes[3].clone()],
            DenoiserKind::Oracle => {
                let oracle = OracleDenoiser {
                    x0: truth_of(rec).normalized(&rec.env).values,
                };
                maps_of(reconstruct_rm(
                    &ctx,
                    &oracle,
                    &schedule,
                    cfg.ensemble,
                    s,
                    &opts,
                )?)
            }
            DenoiserKind::Ridge => {
                let model: &dyn Denoiser = model.as_ref().expect("model loaded for ridge runs");
                maps_of(reconstruct_rm(
                    &ctx,
                    model,
                    &schedule,
                    cfg.ensemble,
                    s,
                    &opts,
                )?)
            }
        };
        let dir = recon_dir(cfg, strategy, &rec.scene_id);
        write_map_stack(&dir.join("members.bin"), &members)?;
        let mean = RadioMap {
            values: mean_map(&members),
            tx: None,
            normalized: true,
            params: cfg.params,
        };
        write_atomic(&dir.join("mean.png"), &gain_png16(&mean)?)
    })?;
    Ok(())
}

fn maps_of(maps: Vec<RadioMap>) -> Vec<Array2<f64>> {
    maps.into_iter().map(|m| m.values).collect()
}

fn mean_map(members: &[Array2<f64>]) -> Array2<f64> {
    let mut sum = members[0].clone();
    for m in &members[1..] {
        sum += m;
    }
    sum / members.len() as f64
}

fn load_members(
    cfg: &ExperimentConfig,
    strategy: SamplingStrategy,
    id: &str,
) -> Result<Vec<Array2<f64>>> {
    let maps = read_map_stack(&recon_dir(cfg, strategy, id).join("members.bin"))?;
    if maps.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    Ok(maps)
}

/// Free cells of the restricted region.
fn search_region(env: &EnvironmentGrid) -> Array2<bool> {
    Array2::from_shape_fn(env.dim(), |(r, c)| {
        env.restricted[[r, c]] && !env.occupancy[[r, c]]
    })
}

fn gain_map(values: Array2<f64>, cfg: &ExperimentConfig) -> RadioMap {
    RadioMap {
        values,
        tx: None,
        normalized: true,
        params: cfg.params,
    }
}

/// Map-based estimators read the ensemble mean restricted to the search
/// region; `ensemble` aggregates per-member argmax estimates.
fn map_estimate(
    cfg: &ExperimentConfig,
    method: Method,
    members: &[Array2<f64>],
    region: &Array2<bool>,
) -> Result<Estimate> {
    let masked = |m: &Array2<f64>| {
        let mut v = m.clone();
        v.zip_mut_with(region, |x, &inside| {
            if !inside {
                *x = 0.0;
            }
        });
        gain_map(v, cfg)
    };
    let mean = masked(&mean_map(members));
    match method {
        Method::Argmax => argmax_localize(&mean, region),
        Method::TopK => topk_weighted_centroid(&mean, cfg.topk),
        Method::Threshold => threshold_region_center(&mean, cfg.threshold_percentile),
        Method::LargestBlob => largest_blob_centroid(&mean, cfg.blob_alpha),
        Method::Ensemble => {
            let ests = members
                .iter()
                .map(|m| argmax_localize(&masked(m), region))
                .collect::<Result<Vec<_>>>()?;
            ensemble_localize(&ests)
        }
        _ => unreachable!("classical method routed to the map estimators"),
    }
}

fn classical_estimate(
    cfg: &ExperimentConfig,
    method: Method,
    rec: &SceneRecord,
    obs: &RssObservations,
) -> Result<Estimate> {
    let model = PathlossModel::new(
        cfg.params.tx_power_dbm - cfg.params.reference_loss_db,
        cfg.params.pathloss_exponent,
    );
    match method {
        Method::Ls => ls_localize(obs, &model),
        Method::Awls => awls_localize(obs, &model),
        // The likelihood maximizer does not depend on the noise level.
        Method::Mbe => mbe_localize(
            obs,
            &model,
            &rec.env.free_restricted_cells(),
            if cfg.noise_std > 0.0 {
                cfg.noise_std
            } else {
                1.0
            },
            None,
        ),
        Method::Nls => nls_localize_with(obs, &model, Exec::Sequential),
        _ => unreachable!("map method routed to the classical estimators"),
    }
}

pub fn cmd_localize(cfg: &ExperimentConfig) -> Result<()> {
    let scenes = load_split(cfg, Split::Test)?;
    let jobs: Vec<(usize, SamplingStrategy)> = (0..scenes.len())
        .flat_map(|i| cfg.strategies.iter().map(move |&s| (i, s)))
        .collect();
    let needs_maps = cfg.estimators.iter().any(|m| m.is_map_based());
    let per_job = Exec::default().try_map(jobs.len(), |j| {
        let (i, strategy) = jobs[j];
        let rec = &scenes[i];
        let members = if needs_maps {
            Some(load_members(cfg, strategy, &rec.scene_id)?)
        } else {
            None
        };
        let path = sample_dir(cfg, strategy, &rec.scene_id).join("measurements.csv");
        let m = read_measurements(&path, strategy, cfg.noise_std)?;
        let obs = RssObservations::new(&m, &rec.env)?;
        let region = search_region(&rec.env);
        let rows: Vec<EstimateRow> = cfg
            .estimators
            .iter()
            .map(|&method| {
                let est = if method.is_map_based() {
                    map_estimate(cfg, method, members.as_ref().expect("maps loaded"), &region)
                } else {
                    classical_estimate(cfg, method, rec, &obs)
                };
                estimate_row(rec, strategy, method, est)
            })
            .collect();
        Ok::<_, Error>(rows)
    })?;
    let rows: Vec<EstimateRow> = per_job.into_iter().flatten().collect();
    write_rows(&cfg.out.join("estimates.csv"), &rows)
}

fn estimate_row(
    rec: &SceneRecord,
    strategy: SamplingStrategy,
    method: Method,
    est: Result<Estimate>,
) -> EstimateRow {
    let base = EstimateRow {
        scene_id: rec.scene_id.clone(),
        strategy: strategy.name().to_string(),
        method: method.name().to_string(),
        row: None,
        col: None,
        le_m: None,
        uncertainty: None,
        converged: false,
        status: String::new(),
    };
    match est {
        Ok(e) => EstimateRow {
            row: Some(e.row),
            col: Some(e.col),
            le_m: Some(localization_error(&e, rec.tx, rec.env.cell_size)),
            uncertainty: e.uncertainty,
            converged: e.converged,
            status: "ok".into(),
            ..base
        },
        Err(e) => EstimateRow {
            status: e.to_string(),
            ..base
        },
    }
}

fn group_name(strategy: &str, method: &str) -> String {
    format!("{strategy}/{method}")
}

pub fn cmd_evaluate(cfg: &ExperimentConfig) -> Result<()> {
    let scenes = load_split(cfg, Split::Test)?;
    let estimates: Vec<EstimateRow> = read_rows(&cfg.out.join("estimates.csv"))?;
    let sampling: Vec<SamplingRow> = read_rows(&cfg.out.join("samples").join("sampling.csv"))?;
    let needs_maps = cfg.estimators.iter().any(|m| m.is_map_based()) && !cfg.metrics.is_empty();
    let mut report = EvalReport::default();
    for rec in &scenes {
        let truth = truth_of(rec).normalized(&rec.env).values;
        for &strategy in &cfg.strategies {
            let ratio = sampling
                .iter()
                .find(|r| r.scene_id == rec.scene_id && r.strategy == strategy.name())
                .ok_or_else(|| {
                    Error::UpstreamArtifactMissing(cfg.out.join("samples").join("sampling.csv"))
                })?
                .ratio;
            let map_scores = if needs_maps {
                let mean = mean_map(&load_members(cfg, strategy, &rec.scene_id)?);
                let mut scores = Vec::new();
                for name in MAP_METRICS.iter().filter(|m| cfg.wants_metric(m)) {
                    let v = match *name {
                        "nmse" => nmse(&mean, &truth)?,
                        "rmse" => rmse(&mean, &truth)?,
                        "ssim" => ssim(&mean, &truth, 1.0)?,
                        _ => psnr(&mean, &truth, 1.0)?,
                    };
                    scores.push((*name, v));
                }
                scores
            } else {
                Vec::new()
            };
            for &method in &cfg.estimators {
                let group = group_name(strategy.name(), method.name());
                let row = estimates
                    .iter()
                    .find(|r| {
                        r.scene_id == rec.scene_id
                            && r.strategy == strategy.name()
                            && r.method == method.name()
                    })
                    .ok_or_else(|| Error::UpstreamArtifactMissing(cfg.out.join("estimates.csv")))?;
                if method.is_map_based() {
                    for &(name, v) in &map_scores {
                        report.push(&rec.scene_id, &group, name, v);
                    }
                }
                match row.le_m {
                    Some(le) => report.push(&rec.scene_id, &group, "le", le),
                    None => report.push(&rec.scene_id, &group, "failed", 1.0),
                }
                report.push(&rec.scene_id, &group, "sampling_ratio", ratio);
            }
        }
    }
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let dir = cfg.out.join("eval");
    write_atomic(&dir.join("metrics.csv"), &csv)?;
    write_atomic(&dir.join("summary.txt"), report.summary_table().as_bytes())
}

/// Relative observation noise of the edge analysis.
const ANALYSIS_SIGMA: f64 = 1.0;
/// Probe candidates lie within this many cells of the analyzed facade.
const ANALYSIS_REACH: usize = 8;

#[derive(serde::Serialize)]
struct FisherRow {
    building: usize,
    segment: usize,
    s_m: f64,
    fisher_diag: f64,
}

#[derive(serde::Serialize)]
struct GreedyRow {
    building: usize,
    step: usize,
    row: usize,
    col: usize,
    mutual_information: f64,
    gain: f64,
}

/// For every building between the emitter and the sensing side, discretize
/// the facade facing the sensors and report the per-segment Fisher
/// information and a greedy probe placement over nearby sensing cells.
pub fn cmd_analyze_sampling(cfg: &ExperimentConfig) -> Result<()> {
    let scenes = load_split(cfg, Split::Test)?;
    let cs = |v: f64, env: &EnvironmentGrid| v * env.cell_size;
    for rec in scenes.iter().take(cfg.analysis_scenes) {
        let env = &rec.env;
        let tx = [
            cs(rec.tx.col as f64 + 0.5, env),
            cs(rec.tx.row as f64 + 0.5, env),
        ];
        let mut fisher_rows = Vec::new();
        let mut greedy_rows = Vec::new();
        let mut blobs = components(&env.occupancy);
        blobs.sort();
        for (b, cells) in blobs.iter().enumerate() {
            let r0 = cells.iter().map(|c| c.0).min().expect("nonempty component");
            let c0 = cells.iter().map(|c| c.1).min().expect("nonempty component");
            let c1 = cells.iter().map(|c| c.1).max().expect("nonempty component") + 1;
            if r0 == 0 || r0 >= rec.tx.row {
                continue;
            }
            let y = cs(r0 as f64, env);
            let (xa, xb) = (cs(c0 as f64, env), cs(c1 as f64, env));
            let apex = [tx[0].clamp(xa, xb), y];
            let incident = [apex[0] - tx[0], apex[1] - tx[1]];
            // Prior correlation over one Fresnel width at the apex.
            let correlation =
                fresnel_zone_width(cfg.params.wavelength(), incident[0].hypot(incident[1]))?;
            let disc = EdgeDiscretization::straight(
                [xa, y],
                [xb, y],
                apex,
                cfg.analysis_segments.max(1),
                [0.0, -1.0],
                incident,
                cfg.params.wavelength(),
                ANALYSIS_SIGMA,
                correlation,
            )?;
            let lo_r = r0.saturating_sub(ANALYSIS_REACH);
            let lo_c = c0.saturating_sub(ANALYSIS_REACH);
            let hi_c = (c1 + ANALYSIS_REACH).min(env.cols());
            let cands: Vec<GridPoint> = (lo_r..r0)
                .flat_map(|r| (lo_c..hi_c).map(move |c| GridPoint::new(r, c)))
                .filter(|&p| env.is_free(p) && env.is_sensing(p))
                .collect();
            if cands.is_empty() {
                continue;
            }
            let probes: Vec<[f64; 2]> = cands
                .iter()
                .map(|p| [cs(p.col as f64 + 0.5, env), cs(p.row as f64 + 0.5, env)])
                .collect();
            let j = fisher_information(&kirchhoff_matrix(&disc, &probes)?, ANALYSIS_SIGMA)?;
            for (k, seg) in disc.segments.iter().enumerate() {
                fisher_rows.push(FisherRow {
                    building: b,
                    segment: k,
                    s_m: seg.s,
                    fisher_diag: j[(k, k)].re,
                });
            }
            let g = greedy_probe_placement(&probes, &disc, cfg.analysis_budget.min(cands.len()))?;
            for (step, (&idx, gain)) in g.order.iter().zip(g.gains()).enumerate() {
                greedy_rows.push(GreedyRow {
                    building: b,
                    step,
                    row: cands[idx].row,
                    col: cands[idx].col,
                    mutual_information: g.cumulative_mi[step],
                    gain,
                });
            }
        }
        let dir = cfg.out.join("analysis").join(&rec.scene_id);
        write_rows(&dir.join("fisher.csv"), &fisher_rows)?;
        write_rows(&dir.join("greedy.csv"), &greedy_rows)?;
    }
    Ok(())
}
