//! Stationarity matrices of the smoothed Lagrangian and the power-iteration step.

use crate::linalg::{outer, BlockDiag, CMat, CVec, C64};

use super::forms::{FormValues, QuadraticForms};
use super::{BeamStack, RateAllocation};

/// `-alpha * ln(sum_k exp(-x_k / alpha))`, a smooth lower bound on `min_k x_k`.
pub fn lse(x: &[f64], alpha: f64) -> f64 {
    let m = x.iter().copied().fold(f64::INFINITY, f64::min);
    let s: f64 = x.iter().map(|&v| (-(v - m) / alpha).exp()).sum();
    m - alpha * s.ln()
}

/// Softmin weights `exp(-x_k / alpha) / sum_l exp(-x_l / alpha)`.
pub fn softmin(x: &[f64], alpha: f64) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::INFINITY, f64::min);
    let e: Vec<f64> = x.iter().map(|&v| (-(v - m) / alpha).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn smoothed_private(values: &FormValues, c: &RateAllocation) -> Vec<f64> {
    values
        .private_rates()
        .iter()
        .zip(&c.c)
        .map(|(r, ck)| r + ck)
        .collect()
}

/// Value of the smoothed Lagrangian at `fbar`.
pub fn lagrangian(fbar: &CVec, c: &RateAllocation, forms: &QuadraticForms, gamma: f64, alpha: f64) -> f64 {
    let v = forms.values(fbar);
    let obj = lse(&smoothed_private(&v, c), alpha);
    // -gamma * [sum C + alpha ln sum exp(-R_c / alpha)] = -gamma * [sum C - lse(R_c)]
    obj - gamma * (c.total() - lse(&v.common_rates(), alpha))
}

/// `(X, Y)` such that the Lagrangian gradient is `(X - Y) fbar / ln 2`.
pub fn kkt_matrices(
    fbar: &CVec,
    c: &RateAllocation,
    forms: &QuadraticForms,
    gamma: f64,
    alpha: f64,
) -> (BlockDiag, BlockDiag) {
    let kk = forms.devices();
    let n = forms.antennas;
    let v = forms.values(fbar);
    let w = softmin(&smoothed_private(&v, c), alpha);
    let u = softmin(&v.common_rates(), alpha);

    let s = forms.noise_to_power;
    let mut x_blocks = Vec::with_capacity(kk + 1);
    let mut y_blocks = Vec::with_capacity(kk + 1);
    let (mut xg, mut yg) = (CMat::zeros(n, n), CMat::zeros(n, n));
    let (mut xg0, mut yg0) = (CMat::zeros(n, n), CMat::zeros(n, n));
    let (mut xs, mut ys) = (0.0, 0.0);
    let mut rank_one: Vec<(f64, f64)> = Vec::with_capacity(kk);
    for k in 0..kk {
        let xa = w[k] / v.a[k];
        let yb = w[k] / v.b[k];
        let xc = gamma * u[k] / v.c[k];
        let yd = gamma * u[k] / v.d[k];
        // blocks 1..K see A/B and C/D; block 0 only C/D
        xg += &forms.g[k] * C64::from(xa + xc);
        yg += &forms.g[k] * C64::from(yb + yd);
        xg0 += &forms.g[k] * C64::from(xc);
        yg0 += &forms.g[k] * C64::from(yd);
        xs += (xa + xc) * s;
        ys += (yb + yd) * s;
        rank_one.push((yb, yd));
    }
    let eye = |m: CMat, d: f64| {
        let mut m = m;
        for i in 0..n {
            m[(i, i)] += d;
        }
        m
    };
    let mut y0 = yg0;
    for k in 0..kk {
        y0 -= outer(&forms.h[k]) * C64::from(rank_one[k].1);
    }
    x_blocks.push(eye(xg0, xs));
    y_blocks.push(eye(y0, ys));
    for k in 0..kk {
        x_blocks.push(eye(xg.clone(), xs));
        y_blocks.push(eye(&yg - outer(&forms.h[k]) * C64::from(rank_one[k].0), ys));
    }
    (BlockDiag::from_blocks(x_blocks), BlockDiag::from_blocks(y_blocks))
}

/// `|| X f - (f^H X f / f^H Y f) Y f ||` with `(X, Y)` assembled at `fbar`.
pub fn stationarity_residual(fbar: &CVec, c: &RateAllocation, forms: &QuadraticForms, gamma: f64, alpha: f64) -> f64 {
    let (x, y) = kkt_matrices(fbar, c, forms, gamma, alpha);
    let xf = x.mul_vec(fbar);
    let yf = y.mul_vec(fbar);
    let lambda = fbar.dotc(&xf).re / fbar.dotc(&yf).re;
    (xf - yf * C64::from(lambda)).norm()
}

/// `Y^{-1} X fbar`, normalized. Blocks of `Y` whose Cholesky factorization
/// fails are ridged by `1e-10 * tr(Y) / dim`.
pub fn gpi_step(fbar: &CVec, x: &BlockDiag, y: &BlockDiag) -> BeamStack {
    let n = x.block_size();
    let rhs = x.mul_vec(fbar);
    let z = match y.solve_hpd(&rhs) {
        Some(z) => z,
        None => {
            let mut ridged = y.clone();
            ridged.add_identity(1e-10 * y.trace_re() / y.dim() as f64);
            ridged.solve_hpd(&rhs).unwrap_or_else(|| {
                // fall back to a pseudo-inverse on the dense matrix
                let dense = ridged.to_dense();
                dense
                    .pseudo_inverse(1e-14)
                    .map(|p| p * &rhs)
                    .unwrap_or_else(|_| rhs.clone())
            })
        }
    };
    BeamStack::new(z, n).normalized()
}
