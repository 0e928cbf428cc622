//! Building and gain-map images, synthetic scene generation, splits and the
//! scene manifest.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, ImageFormat, Luma};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{EnvironmentGrid, GridPoint};
use crate::propagation::{synthesize_radio_map_with, PropagationParams, RadioMap};
use crate::sampling::edge_mask;
use crate::seed;

/// Side of dataset images unless any size is allowed.
pub const DATASET_SIDE: usize = 256;
pub const BINARY_THRESHOLD: u8 = 128;
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn read_luma(path: &Path, any_size: bool) -> Result<(Array2<u16>, u16)> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let img = image::open(path).map_err(|e| Error::UnreadableImage {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if !any_size && (w != DATASET_SIDE || h != DATASET_SIDE) {
        return Err(Error::BadDimensions {
            path: path.to_path_buf(),
            width: img.width(),
            height: img.height(),
        });
    }
    use image::ColorType::{La16, Rgb16, Rgba16, L16};
    let (data, max) = if matches!(img.color(), L16 | La16 | Rgb16 | Rgba16) {
        (
            img.to_luma16().pixels().map(|p| p.0[0]).collect::<Vec<_>>(),
            u16::MAX,
        )
    } else {
        (
            img.to_luma8().pixels().map(|p| u16::from(p.0[0])).collect(),
            255,
        )
    };
    let arr = Array2::from_shape_vec((h, w), data).expect("image shape");
    Ok((arr, max))
}

fn encode_png(img: image::DynamicImage) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .map_err(|e| Error::UnreadableImage {
            path: PathBuf::new(),
            reason: e.to_string(),
        })?;
    Ok(buf.into_inner())
}

/// Grayscale image thresholded at 128: bright pixels are buildings.
pub fn load_building_map(path: &Path, any_size: bool) -> Result<EnvironmentGrid> {
    let (px, max) = read_luma(path, any_size)?;
    let threshold = if max == 255 {
        u16::from(BINARY_THRESHOLD)
    } else {
        u16::from(BINARY_THRESHOLD) << 8
    };
    let occ = px.mapv(|v| v >= threshold);
    if occ.iter().all(|&b| b) {
        return Err(Error::InvalidEnvironment(format!(
            "{}: no free cell for a transmitter",
            path.display()
        )));
    }
    EnvironmentGrid::with_defaults(occ)
}

pub fn building_png(env: &EnvironmentGrid) -> Result<Vec<u8>> {
    let (rows, cols) = env.dim();
    let img = ImageBuffer::from_fn(cols as u32, rows as u32, |x, y| {
        Luma([if env.occupancy[[y as usize, x as usize]] {
            255u8
        } else {
            0
        }])
    });
    encode_png(image::DynamicImage::ImageLuma8(img))
}

pub fn save_building_map(env: &EnvironmentGrid, path: &Path) -> Result<()> {
    write_atomic(path, &building_png(env)?)
}

/// Gain image as a normalized map (pixel / max pixel value).
pub fn load_gain_map(path: &Path, any_size: bool) -> Result<RadioMap> {
    let (px, max) = read_luma(path, any_size)?;
    Ok(RadioMap {
        values: px.mapv(|v| f64::from(v) / f64::from(max)),
        tx: None,
        normalized: true,
        params: PropagationParams::default(),
    })
}

fn gain_values(rm: &RadioMap) -> Result<&Array2<f64>> {
    if !rm.normalized {
        return Err(Error::InvalidParameter(
            "gain images hold normalized maps".into(),
        ));
    }
    Ok(&rm.values)
}

/// 8-bit gain image.
pub fn gain_png(rm: &RadioMap) -> Result<Vec<u8>> {
    let v = gain_values(rm)?;
    let (rows, cols) = v.dim();
    let img = ImageBuffer::from_fn(cols as u32, rows as u32, |x, y| {
        Luma([(v[[y as usize, x as usize]].clamp(0.0, 1.0) * 255.0).round() as u8])
    });
    encode_png(image::DynamicImage::ImageLuma8(img))
}

/// 16-bit gain image for reconstructions.
pub fn gain_png16(rm: &RadioMap) -> Result<Vec<u8>> {
    let v = gain_values(rm)?;
    let (rows, cols) = v.dim();
    let img = ImageBuffer::from_fn(cols as u32, rows as u32, |x, y| {
        Luma([(v[[y as usize, x as usize]].clamp(0.0, 1.0) * 65535.0).round() as u16])
    });
    encode_png(image::DynamicImage::ImageLuma16(img))
}

pub fn save_gain_map(rm: &RadioMap, path: &Path) -> Result<()> {
    write_atomic(path, &gain_png(rm)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneSource {
    Dataset,
    Synthetic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneRecord {
    pub scene_id: String,
    pub env: EnvironmentGrid,
    pub tx: GridPoint,
    /// Received power in dBm for synthetic scenes, gain for loaded ones.
    pub ground_truth: Option<RadioMap>,
    pub source: SceneSource,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSceneOptions {
    pub n: usize,
    pub min_buildings: usize,
    pub max_buildings: usize,
    /// Restricted rows `start..end`; the lower half when unset.
    pub restricted_rows: Option<(usize, usize)>,
    pub params: PropagationParams,
}

impl Default for SyntheticSceneOptions {
    fn default() -> Self {
        Self {
            n: 64,
            min_buildings: 3,
            max_buildings: 10,
            restricted_rows: None,
            params: PropagationParams::default(),
        }
    }
}

/// Axis-aligned rectangle in cells: rows [r0, r0+h), cols [c0, c0+w).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Rect {
    r0: usize,
    c0: usize,
    h: usize,
    w: usize,
}

impl Rect {
    /// Overlap after growing both by one cell, which keeps a street between
    /// buildings.
    fn too_close(&self, o: &Rect) -> bool {
        self.r0 <= o.r0 + o.h
            && o.r0 <= self.r0 + self.h
            && self.c0 <= o.c0 + o.w
            && o.c0 <= self.c0 + self.w
    }
}

/// Random rectangular buildings, an emitter in the restricted region and
/// the synthesized ground truth.
pub fn generate_synthetic_scene(
    opts: &SyntheticSceneOptions,
    scene_id: &str,
    seed: u64,
) -> Result<SceneRecord> {
    generate_synthetic_scene_with(opts, scene_id, seed, Exec::default())
}

pub fn generate_synthetic_scene_with(
    opts: &SyntheticSceneOptions,
    scene_id: &str,
    seed: u64,
    exec: Exec,
) -> Result<SceneRecord> {
    let n = opts.n;
    if n < 16 {
        return Err(Error::InvalidParameter(format!("grid size {n} below 16")));
    }
    if opts.min_buildings > opts.max_buildings {
        return Err(Error::InvalidParameter(
            "building count range is empty".into(),
        ));
    }
    let mut rng = seed::rng(seed);
    let count = rng.random_range(opts.min_buildings..=opts.max_buildings);
    let max_side = (n / 8).max(2);
    let mut attempts = 0;
    // Layouts without a building edge on the sensing side leave nothing for
    // geometry-aware sampling and are redrawn.
    let env = loop {
        let mut rects: Vec<Rect> = Vec::with_capacity(count);
        while rects.len() < count {
            if attempts == MAX_PLACEMENT_ATTEMPTS {
                return Err(Error::PlacementFailure {
                    wanted: count,
                    attempts,
                });
            }
            attempts += 1;
            let h = rng.random_range(2..=max_side);
            let w = rng.random_range(2..=max_side);
            let r = Rect {
                r0: rng.random_range(0..=n - h),
                c0: rng.random_range(0..=n - w),
                h,
                w,
            };
            if rects.iter().all(|o| !r.too_close(o)) {
                rects.push(r);
            }
        }
        let mut occ = Array2::from_elem((n, n), false);
        for r in &rects {
            occ.slice_mut(ndarray::s![r.r0..r.r0 + r.h, r.c0..r.c0 + r.w])
                .fill(true);
        }
        let mut env = EnvironmentGrid::with_defaults(occ)?;
        if let Some((start, end)) = opts.restricted_rows {
            env = env.with_restricted_rows(start, end)?;
        }
        if count == 0 || !edge_mask(&env).is_empty() {
            break env;
        }
        if attempts == MAX_PLACEMENT_ATTEMPTS {
            return Err(Error::PlacementFailure {
                wanted: count,
                attempts,
            });
        }
    };
    let candidates = env.free_restricted_cells();
    if candidates.is_empty() {
        return Err(Error::PlacementFailure {
            wanted: 1,
            attempts,
        });
    }
    let tx = candidates[rng.random_range(0..candidates.len())];
    let rm = synthesize_radio_map_with(&env, tx, &opts.params, exec)?;
    Ok(SceneRecord {
        scene_id: scene_id.to_string(),
        env,
        tx,
        ground_truth: Some(rm),
        source: SceneSource::Synthetic,
    })
}

/// Seeded disjoint split of scene ids.
pub fn split_manifest(
    ids: &[String],
    train: usize,
    test: usize,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>)> {
    if train + test > ids.len() {
        return Err(Error::InvalidParameter(format!(
            "split of {train} + {test} exceeds {} scenes",
            ids.len()
        )));
    }
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut seed::rng(seed));
    let test_ids = shuffled.split_off(train);
    Ok((shuffled, test_ids.into_iter().take(test).collect()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub scene_id: String,
    pub tx_row: usize,
    pub tx_col: usize,
    pub split: Split,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub seed: u64,
}

impl DatasetManifest {
    pub fn ids(&self, split: Split) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| e.split == split)
            .map(|e| e.scene_id.clone())
            .collect()
    }

    pub fn entry(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.scene_id == id)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::UpstreamArtifactMissing(path.to_path_buf()));
        }
        let mut r = csv::Reader::from_path(path)?;
        let entries = r
            .deserialize()
            .collect::<std::result::Result<Vec<ManifestEntry>, _>>()?;
        let train: Vec<_> = entries
            .iter()
            .filter(|e| e.split == Split::Train)
            .map(|e| &e.scene_id)
            .collect();
        if entries
            .iter()
            .filter(|e| e.split == Split::Test)
            .any(|e| train.contains(&&e.scene_id))
        {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                reason: "a scene appears in both splits".into(),
            });
        }
        Ok(Self { entries, seed: 0 })
    }
}

pub fn scene_dir(root: &Path, id: &str) -> PathBuf {
    root.join("scenes").join(id)
}

/// Writes `building.png` and `gain_tx0.png` for a scene.
pub fn write_scene(root: &Path, rec: &SceneRecord) -> Result<()> {
    let dir = scene_dir(root, &rec.scene_id);
    save_building_map(&rec.env, &dir.join("building.png"))?;
    if let Some(rm) = &rec.ground_truth {
        save_gain_map(&rm.normalized(&rec.env), &dir.join("gain_tx0.png"))?;
    }
    Ok(())
}
