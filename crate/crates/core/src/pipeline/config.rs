//! Flat `key = value` experiment configuration with `[section]` headers.
//!
//! Keys are addressed as `section.key`. Unknown keys are rejected so typos
//! surface early. Command-line overrides are applied on top of the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::localization::Method;
use crate::propagation::PropagationParams;
use crate::sampling::SamplingStrategy;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SceneSourceKind {
    Synthetic,
    Dataset,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DenoiserKind {
    Oracle,
    Ridge,
    /// Interpolated measurements, no diffusion.
    None,
}

/// Map quality metrics that can be switched off; LE and the sampling ratio
/// are always reported.
pub const MAP_METRICS: [&str; 4] = ["nmse", "rmse", "ssim", "psnr"];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub source: SceneSourceKind,
    /// Root holding `manifest.csv` and `scenes/` for dataset runs.
    pub dataset_dir: Option<PathBuf>,
    pub any_size: bool,
    pub scene_count: usize,
    pub grid: usize,
    pub min_buildings: usize,
    pub max_buildings: usize,
    pub train_count: usize,
    pub test_count: usize,
    /// Restricted rows `start..end`; the lower half when unset.
    pub restricted_rows: Option<(usize, usize)>,
    pub params: PropagationParams,
    pub strategies: Vec<SamplingStrategy>,
    pub random_budget: usize,
    pub hybrid_fraction: f64,
    /// Reference mask for budget-matched random sampling.
    pub matched_to: SamplingStrategy,
    pub noise_std: f64,
    pub denoiser: DenoiserKind,
    pub patch_radius: usize,
    pub ridge_lambda: f64,
    pub buckets: usize,
    pub pixels_per_example: usize,
    pub steps: usize,
    pub ensemble: usize,
    pub data_consistency: bool,
    pub estimators: Vec<Method>,
    pub topk: usize,
    pub threshold_percentile: f64,
    pub blob_alpha: f64,
    pub metrics: Vec<String>,
    pub analysis_scenes: usize,
    pub analysis_segments: usize,
    pub analysis_budget: usize,
    pub out: PathBuf,
    pub seed: u64,
    /// 0 = all cores.
    pub workers: usize,
}

const DEFAULTS: &[(&str, &str)] = &[
    ("scenes.source", "synthetic"),
    ("scenes.dataset_dir", ""),
    ("scenes.any_size", "false"),
    ("scenes.count", "20"),
    ("scenes.grid", "64"),
    ("scenes.min_buildings", "3"),
    ("scenes.max_buildings", "10"),
    ("scenes.train", "15"),
    ("scenes.test", "5"),
    ("region.restricted_rows", "lower-half"),
    ("propagation.frequency_hz", "5.9e9"),
    ("propagation.tx_power_dbm", "23"),
    ("propagation.pathloss_exponent", "2"),
    ("propagation.noise_floor_dbm", "-100"),
    ("sampling.strategies", "edge, vertex, budget_matched_random"),
    ("sampling.budget", "100"),
    ("sampling.hybrid_fraction", "0.3"),
    ("sampling.matched_to", "edge"),
    ("sampling.noise_std", "0"),
    ("denoiser.kind", "ridge"),
    ("denoiser.patch_radius", "2"),
    ("denoiser.ridge_lambda", "1e-3"),
    ("denoiser.buckets", "10"),
    ("denoiser.pixels_per_example", "256"),
    ("diffusion.steps", "50"),
    ("diffusion.ensemble", "4"),
    ("diffusion.data_consistency", "true"),
    (
        "localization.estimators",
        "argmax, topk, threshold, lbc, ensemble, ls, awls, mbe, nls",
    ),
    ("localization.topk", "10"),
    ("localization.threshold_percentile", "99"),
    ("localization.blob_alpha", "0.9"),
    ("metrics.metrics", "nmse, rmse, ssim, psnr"),
    ("analysis.scenes", "1"),
    ("analysis.segments", "16"),
    ("analysis.budget", "5"),
    ("output.out", "runs/default"),
    ("output.seed", "0"),
    ("output.workers", "0"),
];

/// Effective key/value settings: defaults, then the file, then overrides.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl Default for RawConfig {
    fn default() -> Self {
        Self {
            values: DEFAULTS
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

/// Drops a ` #` or ` ;` comment; the marker must follow whitespace so that
/// values such as paths may still contain it.
fn strip_trailing_comment(v: &str) -> &str {
    let bytes = v.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if (b == b'#' || b == b';') && i > 0 && bytes[i - 1].is_ascii_whitespace() {
            return &v[..i];
        }
    }
    v
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section = String::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| {
                    Error::ConfigInvalid(format!("line {}: unterminated section", n + 1))
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::ConfigInvalid(format!("line {}: expected key = value", n + 1))
            })?;
            let key = if section.is_empty() {
                k.trim().to_string()
            } else {
                format!("{section}.{}", k.trim())
            };
            cfg.set(&key, strip_trailing_comment(v).trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                Error::ConfigInvalid(format!("config {} not found", path.display()))
            }
            _ => Error::Io(e),
        })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(Error::ConfigInvalid(format!("unknown key {key:?}"))),
        }
    }

    /// Applies a `section.key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::ConfigInvalid(format!("override {pair:?} is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    /// Canonical `key = value` listing, one per line in key order.
    pub fn canonical(&self) -> String {
        self.values
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// SHA-256 of the canonical listing, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)
            .parse()
            .map_err(|_| Error::ConfigInvalid(format!("{key} = {:?} is not valid", self.get(key))))
    }

    fn list(&self, key: &str) -> Vec<String> {
        self.get(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect()
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let source = match self.get("scenes.source") {
            "synthetic" => SceneSourceKind::Synthetic,
            "dataset" => SceneSourceKind::Dataset,
            other => {
                return Err(Error::ConfigInvalid(format!(
                    "unknown scene source {other:?}"
                )))
            }
        };
        let dataset_dir = match self.get("scenes.dataset_dir") {
            "" => None,
            d => Some(PathBuf::from(d)),
        };
        if source == SceneSourceKind::Dataset && dataset_dir.is_none() {
            return Err(Error::ConfigInvalid(
                "dataset scenes need scenes.dataset_dir".into(),
            ));
        }
        let restricted_rows = match self.get("region.restricted_rows") {
            "lower-half" => None,
            range => {
                let (a, b) = range.split_once("..").ok_or_else(|| {
                    Error::ConfigInvalid(format!(
                        "region.restricted_rows = {range:?}: expected lower-half or start..end"
                    ))
                })?;
                let parse = |s: &str| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::ConfigInvalid(format!("bad row bound {s:?}")))
                };
                let (a, b) = (parse(a)?, parse(b)?);
                if a >= b {
                    return Err(Error::ConfigInvalid(format!(
                        "empty restricted rows {a}..{b}"
                    )));
                }
                Some((a, b))
            }
        };
        let params = PropagationParams::new(
            self.parsed("propagation.frequency_hz")?,
            self.parsed("propagation.tx_power_dbm")?,
            self.parsed("propagation.pathloss_exponent")?,
            self.parsed("propagation.noise_floor_dbm")?,
        );
        params
            .validate()
            .map_err(|e| Error::ConfigInvalid(format!("propagation: {e}")))?;
        let strategies = self
            .list("sampling.strategies")
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<SamplingStrategy>>>()?;
        if strategies.is_empty() {
            return Err(Error::ConfigInvalid(
                "no sampling strategy configured".into(),
            ));
        }
        let matched_to: SamplingStrategy = self.get("sampling.matched_to").parse()?;
        if matches!(matched_to, SamplingStrategy::BudgetMatchedRandom) {
            return Err(Error::ConfigInvalid(
                "budget matching needs a structured reference".into(),
            ));
        }
        let denoiser = match self.get("denoiser.kind") {
            "oracle" => DenoiserKind::Oracle,
            "ridge" => DenoiserKind::Ridge,
            "none" => DenoiserKind::None,
            other => return Err(Error::ConfigInvalid(format!("unknown denoiser {other:?}"))),
        };
        let estimators = self
            .list("localization.estimators")
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<Method>>>()?;
        let metrics = self.list("metrics.metrics");
        if let Some(m) = metrics.iter().find(|m| !MAP_METRICS.contains(&m.as_str())) {
            return Err(Error::ConfigInvalid(format!("unknown metric {m:?}")));
        }
        let cfg = ExperimentConfig {
            source,
            dataset_dir,
            any_size: self.parsed("scenes.any_size")?,
            scene_count: self.parsed("scenes.count")?,
            grid: self.parsed("scenes.grid")?,
            min_buildings: self.parsed("scenes.min_buildings")?,
            max_buildings: self.parsed("scenes.max_buildings")?,
            train_count: self.parsed("scenes.train")?,
            test_count: self.parsed("scenes.test")?,
            restricted_rows,
            params,
            strategies,
            random_budget: self.parsed("sampling.budget")?,
            hybrid_fraction: self.parsed("sampling.hybrid_fraction")?,
            matched_to,
            noise_std: self.parsed("sampling.noise_std")?,
            denoiser,
            patch_radius: self.parsed("denoiser.patch_radius")?,
            ridge_lambda: self.parsed("denoiser.ridge_lambda")?,
            buckets: self.parsed("denoiser.buckets")?,
            pixels_per_example: self.parsed("denoiser.pixels_per_example")?,
            steps: self.parsed("diffusion.steps")?,
            ensemble: self.parsed("diffusion.ensemble")?,
            data_consistency: self.parsed("diffusion.data_consistency")?,
            estimators,
            topk: self.parsed("localization.topk")?,
            threshold_percentile: self.parsed("localization.threshold_percentile")?,
            blob_alpha: self.parsed("localization.blob_alpha")?,
            metrics,
            analysis_scenes: self.parsed("analysis.scenes")?,
            analysis_segments: self.parsed("analysis.segments")?,
            analysis_budget: self.parsed("analysis.budget")?,
            out: PathBuf::from(self.get("output.out")),
            seed: self.parsed("output.seed")?,
            workers: self.parsed("output.workers")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if self.source == SceneSourceKind::Synthetic
            && self.train_count + self.test_count > self.scene_count
        {
            return bad(format!(
                "split {} + {} exceeds {} scenes",
                self.train_count, self.test_count, self.scene_count
            ));
        }
        if let Some((_, end)) = self.restricted_rows {
            if self.source == SceneSourceKind::Synthetic && end > self.grid {
                return bad(format!(
                    "restricted rows end {end} beyond grid {}",
                    self.grid
                ));
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!(
                "noise_std {} must be finite and nonnegative",
                self.noise_std
            ));
        }
        if !(0.0..1.0).contains(&self.hybrid_fraction) {
            return bad(format!(
                "hybrid_fraction {} must lie in [0, 1)",
                self.hybrid_fraction
            ));
        }
        if self.steps == 0 || self.ensemble == 0 {
            return bad("diffusion steps and ensemble size must be positive".into());
        }
        if !(0.0..=100.0).contains(&self.threshold_percentile) {
            return bad(format!(
                "threshold percentile {} outside [0, 100]",
                self.threshold_percentile
            ));
        }
        if !(self.blob_alpha > 0.0 && self.blob_alpha <= 1.0) {
            return bad(format!("blob_alpha {} must lie in (0, 1]", self.blob_alpha));
        }
        if self.topk == 0 {
            return bad("topk must be positive".into());
        }
        Ok(())
    }

    pub fn wants_metric(&self, name: &str) -> bool {
        self.metrics.iter().any(|m| m == name)
    }
}
