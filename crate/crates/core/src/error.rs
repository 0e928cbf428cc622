use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),

    #[error("transmitter at ({row}, {col}) lies inside a building")]
    TxInsideBuilding { row: usize, col: usize },

    #[error("receiver at ({row}, {col}) lies inside a building")]
    RxInsideBuilding { row: usize, col: usize },

    #[error("point ({row}, {col}) is outside the {rows}x{cols} grid")]
    OutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("covariance is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("candidate set is empty")]
    EmptyCandidates,

    #[error("budget {requested} exceeds the {available} available cells")]
    BudgetTooLarge { requested: usize, available: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mask point ({row}, {col}) lies outside the map")]
    MaskOutsideMap { row: usize, col: usize },

    #[error("measurement set is empty")]
    EmptyMeasurements,

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("bad timestep: {0}")]
    BadTimestep(String),

    #[error("linear system is singular: {0}")]
    SingularSystem(String),

    #[error("query region is empty")]
    EmptyRegion,

    #[error("k = {k} exceeds the {cells} map cells")]
    KTooLarge { k: usize, cells: usize },

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("need at least {required} measurements, got {got}")]
    TooFewMeasurements { required: usize, got: usize },

    #[error("ground-truth map has zero energy")]
    ZeroEnergyTruth,

    #[error("map of {rows}x{cols} is smaller than the {window}x{window} window")]
    MapTooSmallForWindow {
        rows: usize,
        cols: usize,
        window: usize,
    },

    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("bad image dimensions {width}x{height} in {path}")]
    BadDimensions {
        path: PathBuf,
        width: u32,
        height: u32,
    },

    #[error("unreadable image {path}: {reason}")]
    UnreadableImage { path: PathBuf, reason: String },

    #[error("failed to place {wanted} buildings after {attempts} attempts")]
    PlacementFailure { wanted: usize, attempts: usize },

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("missing upstream artifact {0}; run the producing step first")]
    UpstreamArtifactMissing(PathBuf),

    #[error("malformed input {path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
