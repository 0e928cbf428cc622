//! Fresnel integrals C(ν) = ∫₀^ν cos(πt²/2) dt and S(ν) = ∫₀^ν sin(πt²/2) dt.
//!
//! Small and moderate arguments use adaptive Simpson quadrature on panels no
//! wider than a quarter of the local oscillation period. Beyond
//! [`ASYMPTOTIC_THRESHOLD`] the auxiliary-function asymptotic series is used,
//! where the integrand oscillates too fast for quadrature to be economical.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// |ν| above which the asymptotic expansion replaces quadrature.
pub const ASYMPTOTIC_THRESHOLD: f64 = 6.0;

/// Per-panel absolute tolerance for the adaptive Simpson rule.
const PANEL_TOL: f64 = 1e-10;
const MAX_DEPTH: u32 = 40;

pub fn fresnel_integrals(nu: f64) -> Result<(f64, f64)> {
    if !nu.is_finite() {
        return Err(Error::NonFinite("fresnel argument"));
    }
    let x = nu.abs();
    let (c, s) = if x == 0.0 {
        (0.0, 0.0)
    } else if x <= ASYMPTOTIC_THRESHOLD {
        quadrature(x)
    } else {
        asymptotic(x)
    };
    Ok(if nu < 0.0 { (-c, -s) } else { (c, s) })
}

fn integrand(t: f64) -> [f64; 2] {
    let (s, c) = (0.5 * PI * t * t).sin_cos();
    [c, s]
}

fn quadrature(x: f64) -> (f64, f64) {
    let width = 0.25 / x.max(1.0);
    let panels = (x / width).ceil().max(1.0) as usize;
    let h = x / panels as f64;
    let mut acc = [0.0f64; 2];
    for p in 0..panels {
        let a = p as f64 * h;
        let b = if p + 1 == panels { x } else { a + h };
        let v = simpson_panel(a, b);
        acc[0] += v[0];
        acc[1] += v[1];
    }
    (acc[0], acc[1])
}

fn simpson(a: f64, b: f64, fa: [f64; 2], fm: [f64; 2], fb: [f64; 2]) -> [f64; 2] {
    let w = (b - a) / 6.0;
    [
        w * (fa[0] + 4.0 * fm[0] + fb[0]),
        w * (fa[1] + 4.0 * fm[1] + fb[1]),
    ]
}

fn simpson_panel(a: f64, b: f64) -> [f64; 2] {
    let fa = integrand(a);
    let fb = integrand(b);
    let m = 0.5 * (a + b);
    let fm = integrand(m);
    let whole = simpson(a, b, fa, fm, fb);
    refine(a, b, fa, fm, fb, whole, PANEL_TOL, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn refine(
    a: f64,
    b: f64,
    fa: [f64; 2],
    fm: [f64; 2],
    fb: [f64; 2],
    whole: [f64; 2],
    tol: f64,
    depth: u32,
) -> [f64; 2] {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = integrand(lm);
    let frm = integrand(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = [left[0] + right[0] - whole[0], left[1] + right[1] - whole[1]];
    if depth == 0 || delta[0].abs().max(delta[1].abs()) <= 15.0 * tol {
        // Richardson extrapolation of the two-level estimate.
        return [
            left[0] + right[0] + delta[0] / 15.0,
            left[1] + right[1] + delta[1] / 15.0,
        ];
    }
    let l = refine(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1);
    let r = refine(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    [l[0] + r[0], l[1] + r[1]]
}

/// C and S from the auxiliary functions f, g (asymptotic in 1/(πx²)).
fn asymptotic(x: f64) -> (f64, f64) {
    let z = PI * x * x;
    let inv_z2 = 1.0 / (z * z);
    // f: Σ (-1)^m (4m-1)!! / z^{2m},  g: Σ (-1)^m (4m+1)!! / z^{2m+1}
    let mut f_sum = 1.0;
    let mut g_sum = 1.0 / z;
    let mut f_term = 1.0;
    let mut g_term = 1.0 / z;
    for m in 1..30u32 {
        let k = f64::from(4 * m);
        // (4m-1)!! = (4m-5)!! * (4m-3)(4m-1)
        let next_f = -f_term * (k - 3.0) * (k - 1.0) * inv_z2;
        let next_g = -g_term * (k - 1.0) * (k + 1.0) * inv_z2;
        if next_f.abs() >= f_term.abs() || next_g.abs() >= g_term.abs() {
            break;
        }
        f_term = next_f;
        g_term = next_g;
        f_sum += f_term;
        g_sum += g_term;
        if f_term.abs() < 1e-18 && g_term.abs() < 1e-18 {
            break;
        }
    }
    let f = f_sum / (PI * x);
    let g = g_sum / (PI * x);
    let (s, c) = (0.5 * z).sin_cos();
    (0.5 + f * s - g * c, 0.5 - f * c - g * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_is_zero() {
        assert_eq!(fresnel_integrals(0.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn odd_symmetry() {
        for &v in &[0.3, 1.0, 2.7, 5.5, 9.0] {
            let (c, s) = fresnel_integrals(v).unwrap();
            let (cn, sn) = fresnel_integrals(-v).unwrap();
            assert_eq!((c, s), (-cn, -sn));
        }
    }

    #[test]
    fn large_argument_tends_to_half() {
        let (c, s) = fresnel_integrals(50.0).unwrap();
        assert!((c - 0.5).abs() < 0.01 && (s - 0.5).abs() < 0.01);
        let (c, s) = fresnel_integrals(1e6).unwrap();
        assert!((c - 0.5).abs() < 1e-6 && (s - 0.5).abs() < 1e-6);
    }

    #[test]
    fn quadrature_and_asymptotic_branches_meet() {
        let t = ASYMPTOTIC_THRESHOLD;
        let q = quadrature(t);
        let a = asymptotic(t);
        assert!((q.0 - a.0).abs() < 1e-9, "{q:?} vs {a:?}");
        assert!((q.1 - a.1).abs() < 1e-9, "{q:?} vs {a:?}");
    }

    #[test]
    fn non_finite_rejected() {
        assert!(fresnel_integrals(f64::NAN).is_err());
        assert!(fresnel_integrals(f64::INFINITY).is_err());
    }
}
