//! Linear reference precoders without a common stream.

use crate::linalg::{outer, CMat, CVec, C64};

use super::{BeamStack, CsiInput};

fn stack_private(columns: &[CVec], n: usize) -> BeamStack {
    let k = columns.len();
    let mut fbar = CVec::zeros(n * (k + 1));
    let share = 1.0 / (k as f64).sqrt();
    for (i, col) in columns.iter().enumerate() {
        let norm = col.norm();
        if norm > 0.0 {
            fbar.rows_mut((i + 1) * n, n).copy_from(&(col * C64::from(share / norm)));
        }
    }
    BeamStack::new(fbar, n)
}

/// `f_k = h_k / ||h_k||`, equal power per device.
pub fn mrt_precoder(csi: &CsiInput) -> BeamStack {
    stack_private(&csi.h_hat, csi.antennas())
}

/// `f_k = (H H^H + (sigma^2 / P) I)^{-1} h_k`, column-normalized, equal power.
pub fn rzf_precoder(csi: &CsiInput) -> BeamStack {
    let n = csi.antennas();
    let mut gram = CMat::identity(n, n) * C64::from(csi.noise_to_power);
    for h in &csi.h_hat {
        gram += outer(h);
    }
    let chol = gram.cholesky().expect("regularized Gram matrix is positive definite");
    let cols: Vec<CVec> = csi.h_hat.iter().map(|h| chol.solve(h)).collect();
    stack_private(&cols, n)
}
