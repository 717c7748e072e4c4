//! Rayleigh-quotient form of the rate bounds.
//!
//! With `G_k = h_k h_k^H + Phi_k` and `s = sigma^2 / P`:
//!
//! ```text
//! A_k = blkdiag[0, G_k, ..., G_k] + s I        B_k = A_k - h_k h_k^H at block k+1
//! C_k = blkdiag[G_k, G_k, ..., G_k] + s I      D_k = C_k - h_k h_k^H at block 0
//! ```
//!
//! The matrices are never stored. Every quadratic form reduces to the
//! per-block values `f_i^H G_k f_i` and `|h_k^H f_i|^2`, which is what
//! [`FormValues`] caches.

use crate::linalg::{outer, quad_form, BlockDiag, CMat, CVec};

use super::CsiInput;

#[derive(Debug, Clone)]
pub struct QuadraticForms {
    /// `G_k = h_k h_k^H + Phi_k`.
    pub g: Vec<CMat>,
    pub h: Vec<CVec>,
    pub noise_to_power: f64,
    pub antennas: usize,
}

pub fn build_forms(csi: &CsiInput) -> QuadraticForms {
    let g = csi
        .h_hat
        .iter()
        .zip(&csi.phi)
        .map(|(h, phi)| outer(h) + phi)
        .collect();
    QuadraticForms {
        g,
        h: csi.h_hat.clone(),
        noise_to_power: csi.noise_to_power,
        antennas: csi.antennas(),
    }
}

impl QuadraticForms {
    pub fn devices(&self) -> usize {
        self.g.len()
    }

    pub fn stack_len(&self) -> usize {
        self.antennas * (self.devices() + 1)
    }

    fn assemble(&self, k: usize, first_block: bool, minus_block: usize) -> BlockDiag {
        let n = self.antennas;
        let mut blocks = Vec::with_capacity(self.devices() + 1);
        for i in 0..=self.devices() {
            let mut b = if i > 0 || first_block {
                self.g[k].clone()
            } else {
                CMat::zeros(n, n)
            };
            if i == minus_block {
                b -= outer(&self.h[k]);
            }
            blocks.push(b);
        }
        let mut m = BlockDiag::from_blocks(blocks);
        m.add_identity(self.noise_to_power);
        m
    }

    pub fn a(&self, k: usize) -> BlockDiag {
        self.assemble(k, false, usize::MAX)
    }

    pub fn b(&self, k: usize) -> BlockDiag {
        self.assemble(k, false, k + 1)
    }

    pub fn c(&self, k: usize) -> BlockDiag {
        self.assemble(k, true, usize::MAX)
    }

    pub fn d(&self, k: usize) -> BlockDiag {
        self.assemble(k, true, 0)
    }

    pub fn values(&self, fbar: &CVec) -> FormValues {
        let n = self.antennas;
        let kk = self.devices();
        assert_eq!(fbar.len(), self.stack_len(), "beam stack length");
        let s_norm = self.noise_to_power * fbar.norm_squared();
        let mut out = FormValues {
            a: Vec::with_capacity(kk),
            b: Vec::with_capacity(kk),
            c: Vec::with_capacity(kk),
            d: Vec::with_capacity(kk),
        };
        let blocks: Vec<CVec> = (0..=kk).map(|i| fbar.rows(i * n, n).into_owned()).collect();
        for k in 0..kk {
            let gq: Vec<f64> = blocks.iter().map(|fi| quad_form(&self.g[k], fi)).collect();
            let private_sum: f64 = gq[1..].iter().sum();
            let a = private_sum + s_norm;
            let c = gq[0] + private_sum + s_norm;
            let own = self.h[k].dotc(&blocks[k + 1]).norm_sqr();
            let common = self.h[k].dotc(&blocks[0]).norm_sqr();
            out.a.push(a);
            out.b.push(a - own);
            out.c.push(c);
            out.d.push(c - common);
        }
        out
    }
}

/// `f^H A_k f`, `f^H B_k f`, `f^H C_k f`, `f^H D_k f` for every device.
#[derive(Debug, Clone)]
pub struct FormValues {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
}

impl FormValues {
    pub fn private_rates(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(a, b)| (a / b).log2()).collect()
    }

    pub fn common_rates(&self) -> Vec<f64> {
        self.c.iter().zip(&self.d).map(|(c, d)| (c / d).log2()).collect()
    }
}

pub fn rate_private_bar(fbar: &CVec, forms: &QuadraticForms, k: usize) -> f64 {
    forms.values(fbar).private_rates()[k]
}

pub fn rate_common_bar(fbar: &CVec, forms: &QuadraticForms, k: usize) -> f64 {
    forms.values(fbar).common_rates()[k]
}
