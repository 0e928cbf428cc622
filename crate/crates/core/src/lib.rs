//! Desk-scale NLoS emitter localization: knife-edge radio maps over binary
//! building grids, geometry-aware sparse sampling, decoupled-diffusion map
//! reconstruction and a family of map-based and classical RSS estimators.

// `!(x > 0.0)` style guards deliberately reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataio;
pub mod diffusion;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod localization;
pub mod metrics;
pub mod pipeline;
pub mod propagation;
pub mod sampling;
pub mod seed;

pub use error::{Error, Result};
pub use exec::Exec;
pub use geometry::{EnvironmentGrid, GridPoint};
