//! Single knife-edge diffraction: geometry → ν → field ratio / excess loss,
//! plus the Fresnel-zone width and tail bound used to size sampling windows.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::fresnel::fresnel_integrals;
use crate::error::{Error, Result};

/// Lower validity bound of the excess-loss fit.
pub const EXCESS_LOSS_MIN_NU: f64 = -0.7;

/// Knife-edge geometry. `h` is signed: negative means the edge sits below the
/// direct path (clearance).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KnifeEdgeGeometry {
    pub h: f64,
    pub d1: f64,
    pub d2: f64,
    pub wavelength: f64,
}

/// ν = h·√(2(d1+d2) / (λ·d1·d2)).
pub fn diffraction_parameter(g: &KnifeEdgeGeometry) -> Result<f64> {
    if !(g.d1 > 0.0 && g.d2 > 0.0 && g.wavelength > 0.0) {
        return Err(Error::InvalidGeometry(format!(
            "d1, d2 and wavelength must be positive (got {}, {}, {})",
            g.d1, g.d2, g.wavelength
        )));
    }
    if !g.h.is_finite() {
        return Err(Error::NonFinite("blocking height"));
    }
    Ok(g.h * (2.0 * (g.d1 + g.d2) / (g.wavelength * g.d1 * g.d2)).sqrt())
}

/// Which closed form to use for the diffracted field ratio.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FieldRatioForm {
    /// (1+j)/2 · [C(ν) + jS(ν)]
    #[default]
    Direct,
    /// (1+j)/2 · [(½ − C(ν)) + j(½ − S(ν))], the shadow-side textbook form.
    Complementary,
}

/// Diffracted field relative to the unobstructed field, E/E₀.
pub fn knife_edge_field_ratio(nu: f64, form: FieldRatioForm) -> Result<Complex64> {
    let (c, s) = fresnel_integrals(nu)?;
    let inner = match form {
        FieldRatioForm::Direct => Complex64::new(c, s),
        FieldRatioForm::Complementary => Complex64::new(0.5 - c, 0.5 - s),
    };
    Ok(Complex64::new(0.5, 0.5) * inner)
}

/// Excess diffraction loss in dB:
/// 6.9 + 20·log10(√((ν−0.1)²+1) + ν − 0.1) for ν ≥ −0.7, and 0 dB (clear
/// path) below. Never negative.
pub fn excess_loss_db(nu: f64) -> f64 {
    if nu.is_nan() || nu < EXCESS_LOSS_MIN_NU {
        return 0.0;
    }
    if nu == f64::INFINITY {
        return f64::INFINITY;
    }
    let a = nu - 0.1;
    let loss = 6.9 + 20.0 * ((a * a + 1.0).sqrt() + a).log10();
    loss.max(0.0)
}

/// Effective width of the dominant diffraction zone, Δ_F ≈ √(λR).
pub fn fresnel_zone_width(wavelength: f64, path_length: f64) -> Result<f64> {
    if !(wavelength > 0.0 && path_length > 0.0) {
        return Err(Error::InvalidGeometry(format!(
            "wavelength and path length must be positive (got {wavelength}, {path_length})"
        )));
    }
    Ok((wavelength * path_length).sqrt())
}

/// Upper bound on the field contributed by the edge beyond distance Δ from
/// the apex: E₀ / (π k Δ).
pub fn tail_bound(e0: f64, wavenumber: f64, delta: f64) -> Result<f64> {
    if !(wavenumber > 0.0 && delta > 0.0) {
        return Err(Error::InvalidGeometry(format!(
            "wavenumber and window must be positive (got {wavenumber}, {delta})"
        )));
    }
    Ok(e0 / (PI * wavenumber * delta))
}
