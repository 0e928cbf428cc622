//! Independent reference implementations used by the integration suites.
//! None of these call into the library code they check.

#![allow(dead_code, clippy::needless_range_loop, clippy::type_complexity)]

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Gauss–Legendre nodes and weights on [−1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// C(ν), S(ν) by composite 10-point Gauss–Legendre over panels of width
/// at most 1/32.
pub fn fresnel_oracle(nu: f64) -> (f64, f64) {
    let rule = gauss_legendre(10);
    let a = nu.abs();
    let panels = ((a * 32.0).ceil() as usize).max(1);
    let h = a / panels as f64;
    let (mut c, mut s) = (0.0, 0.0);
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for &(x, w) in &rule {
            let t = mid + 0.5 * h * x;
            let arg = std::f64::consts::FRAC_PI_2 * t * t;
            c += 0.5 * h * w * arg.cos();
            s += 0.5 * h * w * arg.sin();
        }
    }
    (c.copysign(nu), s.copysign(nu))
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Centroid of the largest 8-connected set of cells ≥ α·max; equal sizes go
/// to the brighter set, then to the one met first in row-major order.
pub fn blob_oracle(values: &[Vec<f64>], alpha: f64) -> (f64, f64) {
    let rows = values.len();
    let cols = values[0].len();
    let max = values
        .iter()
        .flatten()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let on = |r: usize, c: usize| values[r][c] >= alpha * max;
    let mut uf = UnionFind::new(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            if !on(r, c) {
                continue;
            }
            for (dr, dc) in [(0isize, 1isize), (1, -1), (1, 0), (1, 1)] {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if nr >= 0
                    && nc >= 0
                    && (nr as usize) < rows
                    && (nc as usize) < cols
                    && on(nr as usize, nc as usize)
                {
                    uf.union(r * cols + c, nr as usize * cols + nc as usize);
                }
            }
        }
    }
    // root -> (size, peak, sum_r, sum_c)
    let mut stats: Vec<(usize, usize, f64, f64, f64)> = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if !on(r, c) {
                continue;
            }
            let root = uf.find(r * cols + c);
            match stats.iter_mut().find(|s| s.0 == root) {
                Some(s) => {
                    s.1 += 1;
                    s.2 = s.2.max(values[r][c]);
                    s.3 += r as f64;
                    s.4 += c as f64;
                }
                None => stats.push((root, 1, values[r][c], r as f64, c as f64)),
            }
        }
    }
    let mut best = stats[0];
    for s in &stats[1..] {
        if s.1 > best.1 || (s.1 == best.1 && s.2 > best.2) {
            best = *s;
        }
    }
    (best.3 / best.1 as f64, best.4 / best.1 as f64)
}

/// Candidate minimizing the squared residual to a log-distance model; the
/// first candidate wins ties.
pub fn residual_scan(
    anchors: &[(f64, f64)],
    rss: &[f64],
    p0: f64,
    exponent: f64,
    cell: f64,
    candidates: &[(usize, usize)],
) -> (usize, usize) {
    let mut best = (candidates[0], f64::INFINITY);
    for &(r, c) in candidates {
        let mut sse = 0.0;
        for (&(ar, ac), &y) in anchors.iter().zip(rss) {
            let d = (((ar - r as f64).powi(2) + (ac - c as f64).powi(2)).sqrt() * cell).max(1.0);
            let resid = y - (p0 - 10.0 * exponent * d.log10());
            sse += resid * resid;
        }
        if sse < best.1 {
            best = ((r, c), sse);
        }
    }
    best.0
}

/// ½·ln|det(I + K C Kᴴ / σ²)| via LU.
pub fn mi_oracle(k: &DMatrix<Complex64>, c: &DMatrix<Complex64>, sigma: f64) -> f64 {
    let m = k.nrows();
    let s = DMatrix::<Complex64>::identity(m, m)
        + k * c * k.adjoint() / Complex64::new(sigma * sigma, 0.0);
    0.5 * s.lu().determinant().norm().ln()
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// P(X ≥ wins) for X ~ Binomial(n, ½).
pub fn sign_test_p(wins: usize, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut total = 0.0;
    let mut coef = 1.0f64;
    for k in 0..=n {
        if k > 0 {
            coef *= (n - k + 1) as f64 / k as f64;
        }
        if k >= wins {
            total += coef;
        }
    }
    total / 2f64.powi(n as i32)
}

/// Ordinary least squares slope of y on x.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn oracles_check_themselves() {
    let rule = gauss_legendre(10);
    let integral: f64 = rule.iter().map(|&(x, w)| w * x.powi(18)).sum();
    assert!((integral - 2.0 / 19.0).abs() < 1e-14);
    // Known values C(1) and S(1) to 10 digits.
    let (c, s) = fresnel_oracle(1.0);
    assert!((c - 0.7798934004).abs() < 1e-10 && (s - 0.4382591474).abs() < 1e-10);
    assert_eq!(subsets(6, 3).len(), 20);
    assert!((sign_test_p(0, 5) - 1.0).abs() < 1e-15);
    assert!((sign_test_p(5, 5) - 1.0 / 32.0).abs() < 1e-15);
    assert!((slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-15);
}
