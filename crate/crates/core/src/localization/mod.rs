//! Emitter position estimators. Map-based ones read a (reconstructed) radio
//! map; classical ones work directly on the RSS measurements.

mod classical;
mod map_based;

pub use classical::{
    awls_localize, ls_localize, mbe_localize, nls_fit, nls_localize, nls_localize_with, NlsFit,
    P0Grid, PathlossModel, RssObservations,
};
pub use map_based::{
    argmax_localize, components, ensemble_localize, largest_blob_centroid, threshold_region_center,
    topk_weighted_centroid,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Argmax,
    TopK,
    Threshold,
    LargestBlob,
    Ensemble,
    Ls,
    Awls,
    Mbe,
    Nls,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Argmax,
        Method::TopK,
        Method::Threshold,
        Method::LargestBlob,
        Method::Ensemble,
        Method::Ls,
        Method::Awls,
        Method::Mbe,
        Method::Nls,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Argmax => "argmax",
            Method::TopK => "topk",
            Method::Threshold => "threshold",
            Method::LargestBlob => "lbc",
            Method::Ensemble => "ensemble",
            Method::Ls => "ls",
            Method::Awls => "awls",
            Method::Mbe => "mbe",
            Method::Nls => "nls",
        }
    }

    /// Whether the estimator reads a reconstructed map.
    pub fn is_map_based(self) -> bool {
        matches!(
            self,
            Method::Argmax
                | Method::TopK
                | Method::Threshold
                | Method::LargestBlob
                | Method::Ensemble
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown estimator {s:?}")))
    }
}

/// Sub-cell position estimate in (row, col) cell coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub row: f64,
    pub col: f64,
    pub method: Method,
    /// Localization error in meters, once evaluated.
    pub le: Option<f64>,
    /// Spread of the ensemble the estimate was aggregated from.
    pub uncertainty: Option<f64>,
    pub converged: bool,
}

impl Estimate {
    pub fn new(row: f64, col: f64, method: Method) -> Self {
        Self {
            row,
            col,
            method,
            le: None,
            uncertainty: None,
            converged: true,
        }
    }

    pub fn distance(&self, other: &Estimate) -> f64 {
        (self.row - other.row).hypot(self.col - other.col)
    }

    /// Clamped into a `rows × cols` grid.
    pub(crate) fn clamped(mut self, dim: (usize, usize)) -> Self {
        self.row = self.row.clamp(0.0, (dim.0.max(1) - 1) as f64);
        self.col = self.col.clamp(0.0, (dim.1.max(1) - 1) as f64);
        self
    }
}
