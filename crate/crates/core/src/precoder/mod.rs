//! Max-min-fair rate-splitting precoding.
//!
//! All beams are stacked into one vector `fbar = [f_c; f_1; ...; f_K]` so
//! every achievable-rate bound becomes the log of a ratio of block-diagonal
//! quadratic forms ([`forms`]). The proposed solver ([`mmf`]) alternates a
//! generalized power iteration on the smoothed Lagrangian ([`gpi`]) with
//! waterfilling of the common rate ([`waterfill`]). [`baselines`] holds the
//! linear reference precoders.

pub mod baselines;
pub mod forms;
pub mod gpi;
pub mod mmf;
pub mod waterfill;

use serde::{Deserialize, Serialize};

use crate::ecm::Ecm;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_defect, CMat, CVec, C64};

pub use baselines::{mrt_precoder, rzf_precoder};
pub use forms::{build_forms, rate_common_bar, rate_private_bar, QuadraticForms};
pub use gpi::{gpi_step, kkt_matrices, lagrangian, lse, stationarity_residual};
pub use mmf::{evaluate_beams, gpi_private_only, mmf_solve, stage_one, stacked_mrt};
pub use waterfill::waterfill_common;

/// Channel knowledge handed to the precoder: one estimate and one error
/// covariance per device, plus `sigma^2 / P`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiInput {
    pub h_hat: Vec<CVec>,
    pub phi: Vec<CMat>,
    pub noise_to_power: f64,
}

impl CsiInput {
    pub fn new(h_hat: Vec<CVec>, phi: Vec<Ecm>, noise_to_power: f64) -> Result<Self> {
        let csi = Self {
            h_hat,
            phi: phi.into_iter().map(|e| e.0).collect(),
            noise_to_power,
        };
        csi.validate()?;
        Ok(csi)
    }

    /// Perfect-knowledge input: zero error covariance.
    pub fn perfect(h: Vec<CVec>, noise_to_power: f64) -> Self {
        let n = h.first().map_or(0, |v| v.len());
        let k = h.len();
        Self {
            h_hat: h,
            phi: vec![CMat::zeros(n, n); k],
            noise_to_power,
        }
    }

    pub fn devices(&self) -> usize {
        self.h_hat.len()
    }

    pub fn antennas(&self) -> usize {
        self.h_hat.first().map_or(0, |v| v.len())
    }

    /// Same channel estimates with every covariance replaced by zero.
    pub fn without_covariance(&self) -> Self {
        Self::perfect(self.h_hat.clone(), self.noise_to_power)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.h_hat.len();
        if k == 0 {
            return Err(Error::Dimension("at least one device is required".into()));
        }
        let n = self.antennas();
        if n == 0 || self.h_hat.iter().any(|h| h.len() != n) {
            return Err(Error::Dimension("all channel estimates must share a nonzero length".into()));
        }
        if self.phi.len() != k || self.phi.iter().any(|p| p.shape() != (n, n)) {
            return Err(Error::Dimension("one N x N covariance per device is required".into()));
        }
        if self.phi.iter().any(|p| hermitian_defect(p) > 1e-8) {
            return Err(Error::Precondition("error covariances must be Hermitian".into()));
        }
        if !(self.noise_to_power.is_finite() && self.noise_to_power > 0.0) {
            return Err(Error::Precondition("noise_to_power must be positive".into()));
        }
        let finite = |z: &C64| z.re.is_finite() && z.im.is_finite();
        if !self.h_hat.iter().all(|h| h.iter().all(finite)) || !self.phi.iter().all(|p| p.iter().all(finite)) {
            return Err(Error::NonFinite("csi input"));
        }
        Ok(())
    }
}

/// Stacked beams `[f_c; f_1; ...; f_K]`, each of length `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamStack {
    pub fbar: CVec,
    pub antennas: usize,
}

impl BeamStack {
    pub fn new(fbar: CVec, antennas: usize) -> Self {
        assert!(antennas > 0 && fbar.len() % antennas == 0, "stack length must be a multiple of N");
        Self { fbar, antennas }
    }

    /// Returns the stack scaled to unit norm.
    pub fn normalized(mut self) -> Self {
        let n = self.fbar.norm();
        if n > 0.0 {
            self.fbar /= C64::from(n);
        }
        self
    }

    pub fn streams(&self) -> usize {
        self.fbar.len() / self.antennas
    }

    /// Block `0` is the common beam, block `k + 1` the private beam of device `k`.
    pub fn block(&self, i: usize) -> CVec {
        self.fbar.rows(i * self.antennas, self.antennas).into_owned()
    }

    pub fn common(&self) -> CVec {
        self.block(0)
    }

    pub fn private(&self, k: usize) -> CVec {
        self.block(k + 1)
    }
}

/// Per-device share of the common rate, bits/s/Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateAllocation {
    pub c: Vec<f64>,
}

impl RateAllocation {
    pub fn zeros(k: usize) -> Self {
        Self { c: vec![0.0; k] }
    }

    pub fn total(&self) -> f64 {
        self.c.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// LogSumExp smoothing of the min.
    pub alpha: f64,
    /// GPI stops once `||f_t - f_{t-1}|| < epsilon`.
    pub epsilon: f64,
    /// Lagrange multipliers on the common-rate constraint, ascending.
    pub gamma_grid: Vec<f64>,
    pub max_gpi_iters: usize,
    pub outer_alternations: usize,
    /// Alternations stop early once the objective improves by less than this.
    pub min_improvement: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            epsilon: 0.01,
            gamma_grid: (0..=8).map(|i| 0.5 + 0.05 * i as f64).collect(),
            max_gpi_iters: 500,
            outer_alternations: 10,
            min_improvement: 1e-4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.epsilon > 0.0) {
            return Err(Error::Config("alpha and epsilon must be positive".into()));
        }
        if self.gamma_grid.is_empty() || self.gamma_grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("gamma_grid must be nonempty and ascending".into()));
        }
        if self.max_gpi_iters == 0 {
            return Err(Error::Config("max_gpi_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Solver output with the rates it was selected on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecoderSolution {
    pub beams: BeamStack,
    pub allocation: RateAllocation,
    /// `min_k (C_k + R_p,k)` under the solver's own CSI.
    pub objective: f64,
    pub private_rates: Vec<f64>,
    pub common_rates: Vec<f64>,
    pub gamma: Option<f64>,
    pub gpi_iterations: usize,
}
