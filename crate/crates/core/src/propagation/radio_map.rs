//! Radio-map synthesis: log-distance path loss plus knife-edge excess loss
//! over the obstructions on each tx→rx path (Deygout, at most three edges).

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::knife_edge::{diffraction_parameter, excess_loss_db, KnifeEdgeGeometry};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{trace_obstructions, EnvironmentGrid, GridPoint, ObstructionProfile};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Reference distance of the log-distance law (meters).
pub const REFERENCE_DISTANCE: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    pub frequency_hz: f64,
    pub tx_power_dbm: f64,
    pub pathloss_exponent: f64,
    /// Loss at [`REFERENCE_DISTANCE`].
    pub reference_loss_db: f64,
    /// Received power is clipped from below at this level (dBm).
    pub noise_floor_dbm: f64,
}

impl Default for PropagationParams {
    /// 5.9 GHz, 23 dBm, free-space exponent, -100 dBm floor.
    fn default() -> Self {
        Self::new(5.9e9, 23.0, 2.0, -100.0)
    }
}

impl PropagationParams {
    /// Parameters with the reference loss set to free space at 1 m.
    pub fn new(
        frequency_hz: f64,
        tx_power_dbm: f64,
        pathloss_exponent: f64,
        noise_floor_dbm: f64,
    ) -> Self {
        let wavelength = SPEED_OF_LIGHT / frequency_hz;
        let reference_loss_db =
            20.0 * (4.0 * std::f64::consts::PI * REFERENCE_DISTANCE / wavelength).log10();
        Self {
            frequency_hz,
            tx_power_dbm,
            pathloss_exponent,
            reference_loss_db,
            noise_floor_dbm,
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency_hz
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength()
    }

    /// Received power at the reference distance, i.e. the map peak.
    pub fn peak_dbm(&self) -> f64 {
        self.tx_power_dbm - self.reference_loss_db
    }

    /// Span between the map peak and the noise floor.
    pub fn dynamic_range_db(&self) -> f64 {
        self.peak_dbm() - self.noise_floor_dbm
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "frequency must be positive, got {}",
                self.frequency_hz
            )));
        }
        if !(1.5..=6.0).contains(&self.pathloss_exponent) {
            return Err(Error::InvalidParameter(format!(
                "path-loss exponent {} outside [1.5, 6]",
                self.pathloss_exponent
            )));
        }
        if !(self.dynamic_range_db() > 0.0) {
            return Err(Error::InvalidParameter(
                "noise floor must lie below the peak received power".into(),
            ));
        }
        Ok(())
    }
}

/// Dense N×N signal field for one transmitter.
///
/// In the dBm domain (`normalized == false`) values are received power. In
/// the gain domain values are `(P − floor) / (peak − floor)`, so the map is
/// in [0, 1] and building cells sit at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct RadioMap {
    pub values: Array2<f64>,
    /// Known emitter cell; `None` for reconstructed maps.
    pub tx: Option<GridPoint>,
    pub normalized: bool,
    pub params: PropagationParams,
}

impl RadioMap {
    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn get(&self, p: GridPoint) -> f64 {
        self.values[[p.row, p.col]]
    }

    /// Convert a dBm map to the gain domain using the parameter dynamic
    /// range. Idempotent on already-normalized maps.
    pub fn normalized(&self, env: &EnvironmentGrid) -> RadioMap {
        if self.normalized {
            return self.clone();
        }
        let floor = self.params.noise_floor_dbm;
        let span = self.params.dynamic_range_db();
        let mut values = self.values.mapv(|p| ((p - floor) / span).clamp(0.0, 1.0));
        for ((r, c), v) in values.indexed_iter_mut() {
            if env.occupancy[[r, c]] {
                *v = 0.0;
            }
        }
        RadioMap {
            values,
            tx: self.tx,
            normalized: true,
            params: self.params,
        }
    }

    /// Gain → dBm, inverse of [`RadioMap::normalized`] for unclipped values.
    pub fn to_dbm(&self) -> RadioMap {
        if !self.normalized {
            return self.clone();
        }
        let floor = self.params.noise_floor_dbm;
        let span = self.params.dynamic_range_db();
        RadioMap {
            values: self.values.mapv(|g| floor + g * span),
            tx: self.tx,
            normalized: false,
            params: self.params,
        }
    }
}

/// Total excess loss of an obstruction profile, Deygout construction capped
/// at three edges: the principal edge of the full path plus the principal
/// edge of each sub-path on either side of it.
pub fn deygout_excess_loss(profile: &ObstructionProfile, wavelength: f64) -> f64 {
    if profile.segments.is_empty() {
        return 0.0;
    }
    let edges: Vec<(f64, f64)> = profile
        .segments
        .iter()
        .map(|s| (s.d1, s.blocking_height))
        .collect();
    let end = profile.path_length;
    deygout(&edges, (0.0, 0.0), (end, 0.0), wavelength, 1)
}

/// `edges` are (position along path, height above the antenna plane);
/// `a`, `b` are the sub-path end points in the same coordinates.
fn deygout(edges: &[(f64, f64)], a: (f64, f64), b: (f64, f64), wavelength: f64, depth: u32) -> f64 {
    let span = b.0 - a.0;
    if span <= 0.0 {
        return 0.0;
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, &(x, z)) in edges.iter().enumerate() {
        let d1 = x - a.0;
        let d2 = b.0 - x;
        if d1 <= 0.0 || d2 <= 0.0 {
            continue;
        }
        let line = a.1 + (b.1 - a.1) * d1 / span;
        let g = KnifeEdgeGeometry {
            h: z - line,
            d1,
            d2,
            wavelength,
        };
        let Ok(nu) = diffraction_parameter(&g) else {
            continue;
        };
        if best.is_none_or(|(_, v)| nu > v) {
            best = Some((i, nu));
        }
    }
    let Some((i, nu)) = best else {
        return 0.0;
    };
    let mut loss = excess_loss_db(nu);
    if depth > 0 {
        let apex = edges[i];
        loss += deygout(&edges[..i], a, apex, wavelength, depth - 1);
        loss += deygout(&edges[i + 1..], apex, b, wavelength, depth - 1);
    }
    loss
}

/// Received power (dBm) at `rx`, ignoring whether `rx` is a building.
fn received_dbm(
    env: &EnvironmentGrid,
    tx: GridPoint,
    rx: GridPoint,
    params: &PropagationParams,
) -> Result<f64> {
    let profile = trace_obstructions(env, tx, rx)?;
    let d = profile.path_length.max(REFERENCE_DISTANCE);
    let path_loss = params.reference_loss_db
        + 10.0 * params.pathloss_exponent * (d / REFERENCE_DISTANCE).log10();
    let loss = path_loss + deygout_excess_loss(&profile, params.wavelength());
    Ok((params.tx_power_dbm - loss).max(params.noise_floor_dbm))
}

pub fn synthesize_radio_map(
    env: &EnvironmentGrid,
    tx: GridPoint,
    params: &PropagationParams,
) -> Result<RadioMap> {
    synthesize_radio_map_with(env, tx, params, Exec::default())
}

/// Map synthesis with an explicit execution strategy (rows run in parallel).
pub fn synthesize_radio_map_with(
    env: &EnvironmentGrid,
    tx: GridPoint,
    params: &PropagationParams,
    exec: Exec,
) -> Result<RadioMap> {
    params.validate()?;
    env.check_bounds(tx)?;
    if env.is_building(tx) {
        return Err(Error::TxInsideBuilding {
            row: tx.row,
            col: tx.col,
        });
    }
    let (rows, cols) = env.dim();
    let row_values = exec.try_map(rows, |r| {
        (0..cols)
            .map(|c| {
                let rx = GridPoint::new(r, c);
                if env.is_building(rx) {
                    Ok(params.noise_floor_dbm)
                } else {
                    received_dbm(env, tx, rx, params)
                }
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let flat: Vec<f64> = row_values.into_iter().flatten().collect();
    let values = Array2::from_shape_vec((rows, cols), flat).expect("row-major shape");
    Ok(RadioMap {
        values,
        tx: Some(tx),
        normalized: false,
        params: *params,
    })
}
