//! Downlink CSI error covariance from the observed Fisher information.
//!
//! The NOMP estimate `psi` of every path's `[tau, theta, Re alpha, Im alpha]`
//! is treated as approximately unbiased with covariance `I(psi)^-1`, where
//! `I` is the observed Fisher information of the uplink pilot. Linearizing
//! the rebuilt downlink channel around `psi` maps this to an `N x N`
//! covariance of the downlink error.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channel::{array_response, steering_derivatives, PilotObservation};
use crate::config::SystemConfig;
use crate::linalg::{cis, hermitian_part, CMat, CVec, RMat, C64, J};
use crate::nomp::{EstimateSet, EstimatedPath};

/// Relative ridge applied to an ill-conditioned or indefinite O-FIM.
pub const RIDGE_EPS: f64 = 1e-8;
/// Condition number above which the O-FIM is regularized.
pub const MAX_CONDITION: f64 = 1e12;

/// Stacked real parameters, four per path: `[tau, theta, Re alpha, Im alpha]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(pub DVector<f64>);

impl ParamVector {
    pub fn from_paths(paths: &[EstimatedPath]) -> Self {
        let mut v = DVector::zeros(4 * paths.len());
        for (l, p) in paths.iter().enumerate() {
            v[4 * l] = p.tau_hat;
            v[4 * l + 1] = p.theta_hat;
            v[4 * l + 2] = p.alpha_hat.re;
            v[4 * l + 3] = p.alpha_hat.im;
        }
        Self(v)
    }

    pub fn from_estimates(est: &EstimateSet) -> Self {
        Self::from_paths(&est.paths)
    }

    pub fn num_paths(&self) -> usize {
        self.0.len() / 4
    }

    pub fn path(&self, l: usize) -> EstimatedPath {
        EstimatedPath {
            tau_hat: self.0[4 * l],
            theta_hat: self.0[4 * l + 1],
            alpha_hat: C64::new(self.0[4 * l + 2], self.0[4 * l + 3]),
        }
    }

    pub fn paths(&self) -> Vec<EstimatedPath> {
        (0..self.num_paths()).map(|l| self.path(l)).collect()
    }
}

/// Approximated downlink error covariance, an `N x N` Hermitian PSD matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecm(pub CMat);

impl Ecm {
    pub fn identity(n: usize) -> Self {
        Self(CMat::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMat::zeros(n, n))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }
}

#[derive(Serialize, Deserialize)]
struct PackedEcm {
    n: usize,
    /// Row-major lower triangle, `[re, im]` per entry.
    lower: Vec<[f64; 2]>,
}

impl Serialize for Ecm {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let n = self.0.nrows();
        let lower = (0..n)
            .flat_map(|i| (0..=i).map(move |j| (i, j)))
            .map(|(i, j)| [self.0[(i, j)].re, self.0[(i, j)].im])
            .collect();
        PackedEcm { n, lower }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Ecm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let p = PackedEcm::deserialize(d)?;
        if p.lower.len() != p.n * (p.n + 1) / 2 {
            return Err(serde::de::Error::custom("lower triangle has the wrong length"));
        }
        let mut m = CMat::zeros(p.n, p.n);
        let mut it = p.lower.iter();
        for i in 0..p.n {
            for j in 0..=i {
                let [re, im] = *it.next().expect("length checked");
                m[(i, j)] = C64::new(re, im);
                m[(j, i)] = C64::new(re, -im);
            }
        }
        Ok(Self(m))
    }
}

/// Rows `4l..4l+4` hold the partials of `h_hat(f)^T` with respect to path
/// `l`'s parameters, each row an N-vector over antennas.
pub fn jacobian_dl(psi: &ParamVector, f: f64, cfg: &SystemConfig) -> CMat {
    let n_ant = cfg.antennas;
    let lambda = cfg.lambda_dl();
    let d = cfg.antenna_spacing();
    let mut jac = CMat::zeros(4 * psi.num_paths(), n_ant);
    for l in 0..psi.num_paths() {
        let p = psi.path(l);
        let a = array_response(p.theta_hat, lambda, n_ant, d);
        let delay = cis(-2.0 * PI * f * p.tau_hat);
        let c = 2.0 * PI * (d / lambda) * p.theta_hat.cos();
        for n in 0..n_ant {
            let base = a[n] * delay;
            jac[(4 * l, n)] = C64::new(0.0, -2.0 * PI * f) * p.alpha_hat * base;
            jac[(4 * l + 1, n)] = C64::new(0.0, c * n as f64) * p.alpha_hat * base;
            jac[(4 * l + 2, n)] = base;
            jac[(4 * l + 3, n)] = J * base;
        }
    }
    jac
}

/// Observed Fisher information of the uplink pilot at `psi`:
/// `(2 / sigma^2) Re{ dy_i^H dy_j - (y - y_hat)^H d2y_ij }`.
///
/// `y_hat` is separable across paths, so second derivatives between
/// different paths vanish.
pub fn observed_fim(obs: &PilotObservation, psi: &ParamVector, sigma2: f64, cfg: &SystemConfig) -> RMat {
    fim_terms(obs, psi, sigma2, cfg, true)
}

/// The O-FIM without its residual term, `(2 / sigma^2) Re{ dy^H dy }`.
/// Always positive semidefinite.
pub fn expected_fim(obs: &PilotObservation, psi: &ParamVector, sigma2: f64, cfg: &SystemConfig) -> RMat {
    fim_terms(obs, psi, sigma2, cfg, false)
}

fn fim_terms(obs: &PilotObservation, psi: &ParamVector, sigma2: f64, cfg: &SystemConfig, residual: bool) -> RMat {
    let lp = psi.num_paths();
    let dim = 4 * lp;
    let mut y_hat = CVec::zeros(obs.samples.len());
    let mut firsts: Vec<CVec> = Vec::with_capacity(dim);
    let mut derivs = Vec::with_capacity(lp);
    for l in 0..lp {
        let p = psi.path(l);
        let d = steering_derivatives(p.tau_hat, p.theta_hat, cfg);
        y_hat += &d.u * p.alpha_hat;
        firsts.push(&d.d_tau * p.alpha_hat);
        firsts.push(&d.d_theta * p.alpha_hat);
        firsts.push(d.u.clone());
        firsts.push(&d.u * J);
        derivs.push(d);
    }
    let r = &obs.samples - &y_hat;
    let scale = 2.0 / sigma2;
    let mut fim = RMat::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            fim[(i, j)] = firsts[i].dotc(&firsts[j]).re;
        }
    }
    let paths = if residual { psi.paths() } else { Vec::new() };
    for (l, (d, p)) in derivs.iter().zip(paths).enumerate() {
        // r^H d2y for the ten distinct second partials of one path
        let rd_tt = (r.dotc(&d.d_tau_tau) * p.alpha_hat).re;
        let rd_aa = (r.dotc(&d.d_theta_theta) * p.alpha_hat).re;
        let rd_ta = (r.dotc(&d.d_tau_theta) * p.alpha_hat).re;
        let rt = r.dotc(&d.d_tau);
        let ra = r.dotc(&d.d_theta);
        let o = 4 * l;
        fim[(o, o)] -= rd_tt;
        fim[(o + 1, o + 1)] -= rd_aa;
        fim[(o, o + 1)] -= rd_ta;
        fim[(o, o + 2)] -= rt.re;
        fim[(o, o + 3)] -= (rt * J).re;
        fim[(o + 1, o + 2)] -= ra.re;
        fim[(o + 1, o + 3)] -= (ra * J).re;
    }
    for i in 0..dim {
        for j in i..dim {
            let v = scale * fim[(i, j)];
            fim[(i, j)] = v;
            fim[(j, i)] = v;
        }
    }
    fim
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CrlbDiagnostics {
    /// Condition number of the unit-diagonal scaled O-FIM before any ridge.
    pub condition: f64,
    /// Smallest eigenvalue of the scaled O-FIM before any ridge.
    pub min_eigenvalue: f64,
    /// Set when the ridge or eigenvalue floor was applied.
    pub regularized: bool,
    /// Set when the O-FIM was indefinite and its residual term was dropped.
    pub expected_fallback: bool,
}

/// Inverse of the O-FIM after Jacobi scaling, with eigenvalues floored when
/// the scaled matrix is indefinite or its condition number exceeds
/// [`MAX_CONDITION`].
///
/// The parameters carry very different units (seconds, radians, gain), so
/// the condition test and the ridge act on `D I D` with
/// `D = diag(1 / sqrt|I_ii|)`; in those coordinates the ridge is
/// `RIDGE_EPS * trace / (4 L)`.
pub fn regularized_inverse(fim: &RMat) -> (RMat, CrlbDiagnostics) {
    let dim = fim.nrows();
    if dim == 0 {
        return (RMat::zeros(0, 0), CrlbDiagnostics::default());
    }
    let scale = DVector::from_iterator(
        dim,
        fim.diagonal().iter().map(|&v| if v.abs() > 0.0 { 1.0 / v.abs().sqrt() } else { 1.0 }),
    );
    let scaled = RMat::from_fn(dim, dim, |i, j| fim[(i, j)] * scale[i] * scale[j]);
    let eig = SymmetricEigen::new(scaled.clone());
    let lo = eig.eigenvalues.min();
    let hi = eig.eigenvalues.max();
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let mut diag = CrlbDiagnostics {
        condition,
        min_eigenvalue: lo,
        ..Default::default()
    };
    let inv_scaled = if lo > 0.0 && condition <= MAX_CONDITION {
        scaled
            .cholesky()
            .map(|c| c.inverse())
            .unwrap_or_else(|| eig_inverse(&eig, 0.0))
    } else {
        diag.regularized = true;
        let floor = (RIDGE_EPS * scaled.trace() / dim as f64).max(hi.max(0.0) / MAX_CONDITION);
        eig_inverse(&eig, floor)
    };
    let inv = RMat::from_fn(dim, dim, |i, j| inv_scaled[(i, j)] * scale[i] * scale[j]);
    (symmetrize(&inv), diag)
}

fn eig_inverse(eig: &SymmetricEigen<f64, nalgebra::Dyn>, floor: f64) -> RMat {
    let inv_vals = eig.eigenvalues.map(|v| 1.0 / v.max(floor));
    &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose()
}

fn symmetrize(m: &RMat) -> RMat {
    (m + m.transpose()) * 0.5
}

/// Linearized downlink error covariance `E[e e^H]` from the parameter
/// covariance `I^-1`.
///
/// With rows of `jac` holding `d h^T / d psi_i`, the error is
/// `e = jac^T dpsi`, so the covariance is `jac^T I^-1 conj(jac)`. This is
/// the conjugate of the `jac^H I^-1 jac` arrangement; the two coincide for
/// real Jacobians.
pub fn crlb_matrix(jac: &CMat, fim: &RMat) -> (CMat, CrlbDiagnostics) {
    let (inv, diag) = regularized_inverse(fim);
    let inv_c = inv.map(|v| C64::new(v, 0.0));
    let c = jac.transpose() * inv_c * jac.conjugate();
    (hermitian_part(&c), diag)
}

/// Reciprocity-adjusted covariance
/// `(1/L) sum eta^2 * C + (1/L) sum (1 - eta^2) * I`, with `L = eta.len()`.
/// An empty path list yields the identity.
pub fn ecm_with_reciprocity(c_hat: &CMat, eta: &[f64]) -> Ecm {
    ecm_with_reciprocity_scaled(c_hat, eta, 1.0)
}

/// As [`ecm_with_reciprocity`] with the identity term multiplied by `floor`.
/// An empty path list yields `floor * I`.
pub fn ecm_with_reciprocity_scaled(c_hat: &CMat, eta: &[f64], floor: f64) -> Ecm {
    let n = c_hat.nrows();
    if eta.is_empty() {
        return Ecm(CMat::identity(n, n) * C64::from(floor));
    }
    let l = eta.len() as f64;
    let w: f64 = eta.iter().map(|e| e * e).sum::<f64>() / l;
    let m = c_hat * C64::from(w) + CMat::identity(n, n) * C64::from(floor * (1.0 - w));
    Ecm(hermitian_part(&m))
}

/// Keeps only the diagonal of `c_hat`.
pub fn ecm_diag_only(c_hat: &CMat) -> Ecm {
    let n = c_hat.nrows();
    Ecm(CMat::from_fn(n, n, |i, j| if i == j { C64::new(c_hat[(i, i)].re, 0.0) } else { C64::new(0.0, 0.0) }))
}

/// Which form of the approximated covariance feeds the precoder.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EcmMode {
    #[default]
    Full,
    DiagOnly,
}

/// Scale of the identity term that models gain decorrelation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecorrelationFloor {
    /// `(1 - eta^2) I`, trace `N (1 - eta^2)`.
    Unit,
    /// `(1 - eta^2) / N * I`. With path variance `1/(N L)` this matches the
    /// trace of the true decorrelation error, `L * N * (1 - eta^2) / (N L)`.
    #[default]
    PerAntenna,
}

impl DecorrelationFloor {
    pub fn factor(self, antennas: usize) -> f64 {
        match self {
            Self::Unit => 1.0,
            Self::PerAntenna => 1.0 / antennas as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EcmOptions {
    pub mode: EcmMode,
    pub floor: DecorrelationFloor,
}

/// Rebuilt downlink channel and its approximated error covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedCsi {
    pub h_hat: CVec,
    pub phi: Ecm,
    pub diagnostics: CrlbDiagnostics,
}

/// Full reconstruction for one device from its pilot and NOMP output:
/// `h_hat` at offset `f` with gains scaled by `eta`, and `Phi_hat` from the
/// O-FIM at the estimates. `eta` holds one factor per estimated path.
pub fn reconstruct_csi(
    obs: &PilotObservation,
    est: &EstimateSet,
    eta: &[f64],
    f: f64,
    opts: EcmOptions,
    cfg: &SystemConfig,
) -> ReconstructedCsi {
    let n = cfg.antennas;
    let floor = opts.floor.factor(n);
    let h_hat = crate::nomp::reconstruct_downlink(est, eta, f, cfg);
    if est.paths.is_empty() {
        return ReconstructedCsi {
            h_hat,
            phi: Ecm(CMat::identity(n, n) * C64::from(floor)),
            diagnostics: CrlbDiagnostics::default(),
        };
    }
    let psi = ParamVector::from_estimates(est);
    let sigma2 = cfg.pilot_noise_variance().max(f64::MIN_POSITIVE);
    let jac = jacobian_dl(&psi, f, cfg);
    let (mut c_hat, mut diagnostics) = crlb_matrix(&jac, &observed_fim(obs, &psi, sigma2, cfg));
    if diagnostics.min_eigenvalue <= 0.0 {
        // a spurious or misplaced path makes the residual term dominate;
        // the Gram part alone is still a valid information matrix
        let (c, d) = crlb_matrix(&jac, &expected_fim(obs, &psi, sigma2, cfg));
        c_hat = c;
        diagnostics = CrlbDiagnostics {
            expected_fallback: true,
            ..d
        };
    }
    let c_hat = match opts.mode {
        EcmMode::Full => c_hat,
        EcmMode::DiagOnly => ecm_diag_only(&c_hat).0,
    };
    ReconstructedCsi {
        h_hat,
        phi: ecm_with_reciprocity_scaled(&c_hat, eta, floor),
        diagnostics,
    }
}
