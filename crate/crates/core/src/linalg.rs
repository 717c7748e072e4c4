//! Small complex linear-algebra layer on top of `nalgebra`.
//!
//! Every quadratic form in the precoder is block diagonal with `K + 1`
//! blocks of size `N x N`, so [`BlockDiag`] keeps only the blocks and does
//! products and solves block by block.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CVec = DVector<C64>;
pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;

pub const J: C64 = C64::new(0.0, 1.0);

/// `exp(j * phase)`.
#[inline]
pub fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

/// `a^H b`.
#[inline]
pub fn inner(a: &CVec, b: &CVec) -> C64 {
    a.dotc(b)
}

pub fn outer(a: &CVec) -> CMat {
    a * a.adjoint()
}

/// `Re{x^H M x}` for Hermitian `M`.
pub fn quad_form(m: &CMat, x: &CVec) -> f64 {
    x.dotc(&(m * x)).re
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Unit-norm eigenvector of the largest eigenvalue of a Hermitian matrix.
pub fn dominant_eigenvector(m: &CMat) -> CVec {
    let eig = m.clone().symmetric_eigen();
    let (imax, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    let v: CVec = eig.eigenvectors.column(imax).into_owned();
    let n = v.norm();
    v / C64::from(n)
}

/// `||M - M^H||_F / ||M||_F`, zero for the zero matrix.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (m - m.adjoint()).norm() / norm
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::from(0.5)
}

pub fn trace_re(m: &CMat) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Block-diagonal complex matrix with equally sized square blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiag {
    pub blocks: Vec<CMat>,
}

impl BlockDiag {
    pub fn zeros(n_blocks: usize, block: usize) -> Self {
        Self {
            blocks: vec![CMat::zeros(block, block); n_blocks],
        }
    }

    pub fn from_blocks(blocks: Vec<CMat>) -> Self {
        debug_assert!(blocks.windows(2).all(|w| w[0].shape() == w[1].shape()));
        Self { blocks }
    }

    pub fn block_size(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.nrows())
    }

    pub fn dim(&self) -> usize {
        self.blocks.len() * self.block_size()
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &BlockDiag, scale: f64) {
        let s = C64::from(scale);
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            *a += b * s;
        }
    }

    pub fn mul_vec(&self, x: &CVec) -> CVec {
        let n = self.block_size();
        let mut out = CVec::zeros(self.dim());
        for (i, b) in self.blocks.iter().enumerate() {
            let xi = x.rows(i * n, n);
            out.rows_mut(i * n, n).copy_from(&(b * xi));
        }
        out
    }

    /// `Re{x^H M x}`.
    pub fn quad(&self, x: &CVec) -> f64 {
        let n = self.block_size();
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let xi = x.rows(i * n, n);
                xi.dotc(&(b * xi)).re
            })
            .sum()
    }

    pub fn trace_re(&self) -> f64 {
        self.blocks.iter().map(trace_re).sum()
    }

    /// Solves `M z = x` block by block. Each block is expected Hermitian
    /// positive definite; returns `None` if any Cholesky factorization fails.
    pub fn solve_hpd(&self, x: &CVec) -> Option<CVec> {
        let n = self.block_size();
        let mut out = CVec::zeros(self.dim());
        for (i, b) in self.blocks.iter().enumerate() {
            let chol = b.clone().cholesky()?;
            let zi = chol.solve(&x.rows(i * n, n).into_owned());
            out.rows_mut(i * n, n).copy_from(&zi);
        }
        Some(out)
    }

    pub fn add_identity(&mut self, value: f64) {
        for b in &mut self.blocks {
            for d in 0..b.nrows() {
                b[(d, d)] += value;
            }
        }
    }

    pub fn to_dense(&self) -> CMat {
        let n = self.block_size();
        let mut out = CMat::zeros(self.dim(), self.dim());
        for (i, b) in self.blocks.iter().enumerate() {
            out.view_mut((i * n, i * n), (n, n)).copy_from(b);
        }
        out
    }
}
