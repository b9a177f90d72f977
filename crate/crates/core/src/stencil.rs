//! Finite-difference weights and first-derivative stencils on uniform grids.

use crate::error::{Error, Result};

/// Fornberg's recursion: weights `w[d][i]` such that
/// `f^(d)(z) ~ sum_i w[d][i] f(xs[i])` for `d = 0..=m`.
pub fn fornberg(z: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    if n == 0 {
        return c;
    }
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] *= c4 / c3;
        }
        c1 = c2;
    }
    c
}

/// `d`-th derivative at the first sample of `v` (uniform spacing `h`, samples
/// ordered away from the evaluation point) with accuracy order `p`.
pub fn one_sided(v: &[f64], h: f64, d: usize, p: usize) -> Result<f64> {
    let npts = d + p.max(1);
    if v.len() < npts {
        return Err(Error::StencilTooShort { order: d, available: v.len() });
    }
    let xs: Vec<f64> = (0..npts).map(|i| i as f64).collect();
    let w = fornberg(0.0, &xs, d);
    let scale = h.powi(d as i32);
    Ok(w[d].iter().zip(v).map(|(w, f)| w * f).sum::<f64>() / scale)
}

/// Second-order one-sided first derivative at `v[0]`: `(-3 v0 + 4 v1 - v2) / 2h`.
pub fn one_sided_first(v: &[f64], h: f64) -> f64 {
    (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
}

/// First derivative at every node: centered 3-point in the interior,
/// one-sided 3-point at both ends. Second order everywhere.
pub fn derivative(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    if n < 3 {
        return out;
    }
    for i in 1..n - 1 {
        out[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    }
    out[0] = one_sided_first(v, h);
    out[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
    out
}

/// Centered in the interior, first-order one-sided at the ends: the
/// summation-by-parts operator for the trapezoid inner product, i.e.
/// `<u, D v> + <D u, v> = u v |_ends`. Second order globally.
pub fn derivative_sbp(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    for i in 1..n - 1 {
        out[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    }
    out[0] = (v[1] - v[0]) / h;
    out[n - 1] = (v[n - 1] - v[n - 2]) / h;
    out
}

/// Second derivative: centered 3-point in the interior, one-sided 4-point
/// (second order) at the ends.
pub fn second_derivative(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    if n < 4 {
        return out;
    }
    let h2 = h * h;
    for i in 1..n - 1 {
        out[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / h2;
    }
    out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2;
    out[n - 1] = (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) / h2;
    out
}
