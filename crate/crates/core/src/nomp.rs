//! Two-dimensional Newtonized orthogonal matching pursuit over the joint
//! delay-angle dictionary, and downlink reconstruction from its output.
//!
//! Each outer iteration detects the strongest grid atom in the residual,
//! refines it off-grid with a guarded Newton step, cyclically re-refines all
//! detected paths and re-fits every gain by least squares. Detection stops
//! once the normalized grid metric `|u^H r|^2 / ||u||^2` drops below `kappa`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::channel::{array_response, steering_derivatives, steering_u, ChannelVector, PathParams, PilotObservation};
use crate::config::SystemConfig;
use crate::linalg::{cis, CMat, CVec, C64};

/// Angles are clamped to `|theta| <= THETA_LIMIT`.
pub const THETA_LIMIT: f64 = PI / 2.0 - 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NompConfig {
    /// Grid points per resolution cell, in each dimension.
    pub grid_oversampling: usize,
    /// Detection threshold on `|u^H r|^2 / ||u||^2`. `None` derives a CFAR
    /// threshold from the pilot noise variance and `false_alarm_rate`.
    pub kappa: Option<f64>,
    pub false_alarm_rate: f64,
    /// Cyclic refinement passes after each new detection.
    pub newton_rounds: usize,
    /// Cap on detected paths; `None` means `2 L`.
    pub max_paths: Option<usize>,
}

impl Default for NompConfig {
    fn default() -> Self {
        Self {
            grid_oversampling: 4,
            kappa: None,
            false_alarm_rate: 1e-2,
            newton_rounds: 3,
            max_paths: None,
        }
    }
}

impl NompConfig {
    pub fn max_paths(&self, cfg: &SystemConfig) -> usize {
        self.max_paths.unwrap_or(2 * cfg.paths).max(1)
    }

    /// Detection threshold. Under noise only, the metric at each grid point
    /// is `sigma^2 * Exp(1)`; the union bound over all `G` grid points puts
    /// the false-alarm probability at or below `pfa` when
    /// `kappa = sigma^2 (ln G - ln pfa)`.
    pub fn threshold(&self, cfg: &SystemConfig) -> f64 {
        if let Some(k) = self.kappa {
            return k;
        }
        let os = self.grid_oversampling.max(1);
        let grid_points = (os * cfg.subcarriers * os * cfg.antennas) as f64;
        let pfa = self.false_alarm_rate.clamp(1e-300, 1.0);
        cfg.pilot_noise_variance() * (grid_points.ln() - pfa.ln())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatedPath {
    pub tau_hat: f64,
    pub theta_hat: f64,
    pub alpha_hat: C64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSet {
    pub paths: Vec<EstimatedPath>,
    /// `y - sum_l alpha_l u(tau_l, theta_l)`.
    #[serde(skip, default = "empty_vec")]
    pub residual: CVec,
    /// Set when `max_paths` was hit while the residual still exceeded kappa.
    pub truncated: bool,
    /// Number of near-duplicate detections removed by the LS update.
    pub dropped_duplicates: usize,
}

fn empty_vec() -> CVec {
    CVec::zeros(0)
}

impl EstimateSet {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    /// Noiseless pilot implied by the estimates.
    pub fn synthesize(&self, cfg: &SystemConfig) -> CVec {
        self.paths
            .iter()
            .fold(CVec::zeros(cfg.subcarriers * cfg.antennas), |acc, p| {
                acc + steering_u(p.tau_hat, p.theta_hat, cfg) * p.alpha_hat
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub tau: f64,
    pub theta: f64,
    pub metric: f64,
    pub delay_bin: usize,
    pub angle_bin: usize,
}

/// Oversampled delay x spatial-frequency grid, evaluated with two FFT passes.
///
/// Delay bins are `tau_p = p / (P delta_f)`, `p < P = os M`; spatial bins are
/// `(d / lambda) sin(theta_q) = (q - Q/2) / Q`, `q < Q = os N`. Bins whose
/// angle would reach +-pi/2 are skipped.
pub struct DelayAngleGrid {
    subcarriers: usize,
    antennas: usize,
    delay_bins: usize,
    angle_bins: usize,
    spacing_hz: f64,
    spatial_ratio: f64,
    fft_angle: Arc<dyn Fft<f64>>,
    ifft_delay: Arc<dyn Fft<f64>>,
}

impl DelayAngleGrid {
    pub fn new(cfg: &SystemConfig, oversampling: usize) -> Self {
        let os = oversampling.max(1);
        let delay_bins = os * cfg.subcarriers;
        let angle_bins = os * cfg.antennas;
        let mut planner = FftPlanner::new();
        Self {
            subcarriers: cfg.subcarriers,
            antennas: cfg.antennas,
            delay_bins,
            angle_bins,
            spacing_hz: cfg.subcarrier_spacing_hz,
            spatial_ratio: cfg.antenna_spacing() / cfg.lambda_ul(),
            fft_angle: planner.plan_fft_forward(angle_bins),
            ifft_delay: planner.plan_fft_inverse(delay_bins),
        }
    }

    pub fn delay_bins(&self) -> usize {
        self.delay_bins
    }

    pub fn angle_bins(&self) -> usize {
        self.angle_bins
    }

    pub fn delay_of(&self, p: usize) -> f64 {
        p as f64 / (self.delay_bins as f64 * self.spacing_hz)
    }

    /// `None` for bins at or beyond endfire.
    pub fn angle_of(&self, q: usize) -> Option<f64> {
        let nu = (q as f64 - (self.angle_bins / 2) as f64) / self.angle_bins as f64;
        let s = nu / self.spatial_ratio;
        (s.abs() < 1.0).then(|| s.asin())
    }

    /// `|u^H r|^2 / ||u||^2` for every grid point, indexed `[p][q]`.
    pub fn metric_map(&self, residual: &CVec) -> DMatrix<f64> {
        let (m, n) = (self.subcarriers, self.antennas);
        assert_eq!(residual.len(), m * n, "residual must have length M*N");
        let (p_bins, q_bins) = (self.delay_bins, self.angle_bins);
        let q_off = (q_bins / 2) as f64;
        // angle pass: sum_n r[i,n] exp(-j 2 pi n (q - Q/2) / Q)
        let mut angle_spec = vec![C64::new(0.0, 0.0); m * q_bins];
        let mut buf = vec![C64::new(0.0, 0.0); q_bins];
        for i in 0..m {
            buf.iter_mut().for_each(|b| *b = C64::new(0.0, 0.0));
            for k in 0..n {
                buf[k] = residual[i * n + k] * cis(2.0 * PI * k as f64 * q_off / q_bins as f64);
            }
            self.fft_angle.process(&mut buf);
            angle_spec[i * q_bins..(i + 1) * q_bins].copy_from_slice(&buf);
        }
        // delay pass: sum_i g[i,q] exp(+j 2 pi i p / P); the floor(-M/2) offset
        // only rotates the phase and drops out of the magnitude
        let norm = (m * n) as f64;
        let mut out = DMatrix::zeros(p_bins, q_bins);
        let mut col = vec![C64::new(0.0, 0.0); p_bins];
        for q in 0..q_bins {
            col.iter_mut().for_each(|b| *b = C64::new(0.0, 0.0));
            for i in 0..m {
                col[i] = angle_spec[i * q_bins + q];
            }
            self.ifft_delay.process(&mut col);
            for p in 0..p_bins {
                out[(p, q)] = col[p].norm_sqr() / norm;
            }
        }
        out
    }

    /// Grid argmax; ties go to the lowest delay bin, then the lowest angle bin.
    pub fn detect(&self, residual: &CVec) -> Detection {
        let map = self.metric_map(residual);
        let mut best: Option<Detection> = None;
        for p in 0..self.delay_bins {
            for q in 0..self.angle_bins {
                let Some(theta) = self.angle_of(q) else { continue };
                let metric = map[(p, q)];
                if best.is_none_or(|b| metric > b.metric) {
                    best = Some(Detection {
                        tau: self.delay_of(p),
                        theta,
                        metric,
                        delay_bin: p,
                        angle_bin: q,
                    });
                }
            }
        }
        best.expect("grid has at least one admissible angle")
    }
}

/// New-detection step on a fresh grid. Panics on an all-zero residual.
pub fn coarse_detect(residual: &CVec, cfg: &SystemConfig, nomp: &NompConfig) -> Detection {
    assert!(residual.iter().any(|z| *z != C64::new(0.0, 0.0)), "residual must be nonzero");
    DelayAngleGrid::new(cfg, nomp.grid_oversampling).detect(residual)
}

/// Single-atom least-squares gain `u^H r / ||u||^2`.
pub fn gain_ls_single(residual: &CVec, tau: f64, theta: f64, cfg: &SystemConfig) -> C64 {
    let u = steering_u(tau, theta, cfg);
    u.dotc(residual) / u.norm_squared()
}

/// Surrogate fit objective `2 Re{alpha^* u^H y} - |alpha|^2 ||u||^2`.
pub fn surrogate_objective(y: &CVec, path: &EstimatedPath, cfg: &SystemConfig) -> f64 {
    let u = steering_u(path.tau_hat, path.theta_hat, cfg);
    2.0 * (path.alpha_hat.conj() * u.dotc(y)).re - path.alpha_hat.norm_sqr() * u.norm_squared()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonStep {
    pub path: EstimatedPath,
    pub accepted: bool,
    pub objective_before: f64,
    pub objective_after: f64,
}

fn clamp_path(tau: f64, theta: f64, cfg: &SystemConfig) -> (f64, f64) {
    (tau.clamp(0.0, cfg.max_delay()), theta.clamp(-THETA_LIMIT, THETA_LIMIT))
}

/// One guarded Newton step on `(tau, theta)` for the surrogate with the gain
/// eliminated, `J(tau, theta) = |u^H y|^2 / ||u||^2`, followed by a gain
/// re-fit. `y_loc` is the residual with this path added back.
///
/// The step is kept only when the 2x2 Hessian is negative definite and the
/// objective strictly increases; otherwise the path is returned unchanged.
pub fn newton_step(y_loc: &CVec, path: EstimatedPath, cfg: &SystemConfig) -> NewtonStep {
    let d = steering_derivatives(path.tau_hat, path.theta_hat, cfg);
    // ||u||^2 = MN does not depend on (tau, theta)
    let energy = d.u.norm_squared();
    let z = d.u.dotc(y_loc);
    let before = z.norm_sqr() / energy;
    let rejected = NewtonStep {
        path,
        accepted: false,
        objective_before: before,
        objective_after: before,
    };

    let ac = (z / energy).conj();
    let z_t = d.d_tau.dotc(y_loc);
    let z_a = d.d_theta.dotc(y_loc);
    let g_t = 2.0 * (ac * z_t).re;
    let g_a = 2.0 * (ac * z_a).re;
    let h_tt = 2.0 * ((z_t.conj() * z_t).re / energy + (ac * d.d_tau_tau.dotc(y_loc)).re);
    let h_aa = 2.0 * ((z_a.conj() * z_a).re / energy + (ac * d.d_theta_theta.dotc(y_loc)).re);
    let h_ta = 2.0 * ((z_a.conj() * z_t).re / energy + (ac * d.d_tau_theta.dotc(y_loc)).re);
    let det = h_tt * h_aa - h_ta * h_ta;
    if !(h_tt < 0.0 && det > 0.0) {
        return rejected;
    }
    let step_t = -(h_aa * g_t - h_ta * g_a) / det;
    let step_a = -(-h_ta * g_t + h_tt * g_a) / det;
    if !(step_t.is_finite() && step_a.is_finite()) {
        return rejected;
    }
    let (tau, theta) = clamp_path(path.tau_hat + step_t, path.theta_hat + step_a, cfg);
    let u = steering_u(tau, theta, cfg);
    let z_new = u.dotc(y_loc);
    let after = z_new.norm_sqr() / u.norm_squared();
    if after > before {
        NewtonStep {
            path: EstimatedPath {
                tau_hat: tau,
                theta_hat: theta,
                alpha_hat: z_new / u.norm_squared(),
            },
            accepted: true,
            objective_before: before,
            objective_after: after,
        }
    } else {
        rejected
    }
}

pub fn newton_refine(y_loc: &CVec, path: EstimatedPath, cfg: &SystemConfig) -> EstimatedPath {
    newton_step(y_loc, path, cfg).path
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsUpdate {
    /// One gain per input path; dropped paths get zero.
    pub gains: Vec<C64>,
    pub residual: CVec,
    /// Indices of columns dropped as linearly dependent on earlier ones.
    pub dropped: Vec<usize>,
}

/// Relative residual norm below which a steering column counts as a duplicate.
const DUPLICATE_TOL: f64 = 1e-8;

/// Joint least-squares gain fit `U^+ y` over all paths.
pub fn ls_update_all(y: &CVec, paths: &[EstimatedPath], cfg: &SystemConfig) -> LsUpdate {
    let cols: Vec<CVec> = paths
        .iter()
        .map(|p| steering_u(p.tau_hat, p.theta_hat, cfg))
        .collect();
    // greedy Gram-Schmidt pass to find dependent columns
    let mut basis: Vec<CVec> = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (i, u) in cols.iter().enumerate() {
        let mut v = u.clone();
        for q in &basis {
            let c = q.dotc(&v);
            v -= q * c;
        }
        let nv = v.norm();
        if nv <= DUPLICATE_TOL * u.norm() {
            dropped.push(i);
        } else {
            basis.push(v / C64::from(nv));
            kept.push(i);
        }
    }
    let mut gains = vec![C64::new(0.0, 0.0); paths.len()];
    if kept.is_empty() {
        return LsUpdate {
            gains,
            residual: y.clone(),
            dropped,
        };
    }
    let u = CMat::from_columns(&kept.iter().map(|&i| cols[i].clone()).collect::<Vec<_>>());
    let qr = u.clone().qr();
    let qty = qr.q().adjoint() * y;
    let x = qr
        .r()
        .solve_upper_triangular(&qty)
        .expect("independent columns give an invertible R");
    for (slot, &i) in kept.iter().enumerate() {
        gains[i] = x[slot];
    }
    let residual = y - &u * &x;
    LsUpdate {
        gains,
        residual,
        dropped,
    }
}

fn cyclic_refine(y: &CVec, paths: &mut [EstimatedPath], residual: &mut CVec, rounds: usize, cfg: &SystemConfig) {
    for _ in 0..rounds {
        for p in paths.iter_mut() {
            let y_loc = &*residual + steering_u(p.tau_hat, p.theta_hat, cfg) * p.alpha_hat;
            *p = newton_refine(&y_loc, *p, cfg);
            *residual = y_loc - steering_u(p.tau_hat, p.theta_hat, cfg) * p.alpha_hat;
        }
    }
    debug_assert_eq!(residual.len(), y.len());
}

/// Runs the full detect / refine / re-fit loop on one pilot observation.
pub fn nomp_extract(obs: &PilotObservation, cfg: &SystemConfig, nomp: &NompConfig) -> EstimateSet {
    let y = &obs.samples;
    let grid = DelayAngleGrid::new(cfg, nomp.grid_oversampling);
    let kappa = nomp.threshold(cfg);
    let max_paths = nomp.max_paths(cfg);
    let mut residual = y.clone();
    let mut paths: Vec<EstimatedPath> = Vec::new();
    let mut truncated = false;
    let mut dropped_duplicates = 0;
    // bounded so repeated duplicate detections cannot spin forever
    for _ in 0..(2 * max_paths + 2) {
        if residual.iter().all(|z| *z == C64::new(0.0, 0.0)) {
            break;
        }
        let det = grid.detect(&residual);
        if det.metric < kappa {
            break;
        }
        if paths.len() >= max_paths {
            truncated = true;
            break;
        }
        let alpha = gain_ls_single(&residual, det.tau, det.theta, cfg);
        let mut path = EstimatedPath {
            tau_hat: det.tau,
            theta_hat: det.theta,
            alpha_hat: alpha,
        };
        path = newton_refine(&residual, path, cfg);
        residual -= steering_u(path.tau_hat, path.theta_hat, cfg) * path.alpha_hat;
        paths.push(path);

        cyclic_refine(y, &mut paths, &mut residual, nomp.newton_rounds, cfg);

        let ls = ls_update_all(y, &paths, cfg);
        for (p, g) in paths.iter_mut().zip(&ls.gains) {
            p.alpha_hat = *g;
        }
        if !ls.dropped.is_empty() {
            dropped_duplicates += ls.dropped.len();
            let mut idx = 0;
            paths.retain(|_| {
                let keep = !ls.dropped.contains(&idx);
                idx += 1;
                keep
            });
        }
        residual = ls.residual;
    }
    EstimateSet {
        paths,
        residual,
        truncated,
        dropped_duplicates,
    }
}

/// Downlink CSI rebuilt from uplink estimates: delays and angles carry over,
/// gains are scaled by `eta`, and the array response and delay phase are
/// evaluated at the downlink wavelength and offset `f`.
///
/// `eta` holds one factor per estimated path. An empty estimate set yields the
/// zero vector.
pub fn reconstruct_downlink(est: &EstimateSet, eta: &[f64], f: f64, cfg: &SystemConfig) -> ChannelVector {
    assert_eq!(eta.len(), est.paths.len(), "one eta per estimated path");
    let (lambda, d) = (cfg.lambda_dl(), cfg.antenna_spacing());
    est.paths
        .iter()
        .zip(eta)
        .fold(CVec::zeros(cfg.antennas), |acc, (p, &e)| {
            acc + array_response(p.theta_hat, lambda, cfg.antennas, d)
                * (p.alpha_hat * e * cis(-2.0 * PI * f * p.tau_hat))
        })
}

/// Error of one true path against its matched estimate. Delay error is in
/// units of `1/delta_f` (wrapped, since the pilot is periodic in delay), angle
/// error in spatial frequency `sin(theta)/2`. Unmatched paths carry NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathError {
    pub truth: usize,
    pub estimate: Option<usize>,
    pub delay: f64,
    pub angle: f64,
    /// `|alpha_hat - alpha_ul| / |alpha_ul|`.
    pub gain: f64,
}

fn wrapped(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Greedy one-to-one matching of estimates to true paths, closest pair first
/// by the larger of the two normalized errors.
pub fn match_paths(truth: &[PathParams], est: &EstimateSet, cfg: &SystemConfig) -> Vec<PathError> {
    let err = |t: &PathParams, e: &EstimatedPath| {
        (
            wrapped((e.tau_hat - t.tau) * cfg.subcarrier_spacing_hz),
            (e.theta_hat.sin() - t.theta.sin()).abs() / 2.0,
        )
    };
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(truth.len() * est.paths.len());
    for (i, t) in truth.iter().enumerate() {
        for (j, e) in est.paths.iter().enumerate() {
            let (d, a) = err(t, e);
            pairs.push((d.max(a), i, j));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out: Vec<PathError> = (0..truth.len())
        .map(|i| PathError {
            truth: i,
            estimate: None,
            delay: f64::NAN,
            angle: f64::NAN,
            gain: f64::NAN,
        })
        .collect();
    let mut used = vec![false; est.paths.len()];
    for (_, i, j) in pairs {
        if out[i].estimate.is_some() || used[j] {
            continue;
        }
        used[j] = true;
        let (t, e) = (&truth[i], &est.paths[j]);
        let (delay, angle) = err(t, e);
        out[i] = PathError {
            truth: i,
            estimate: Some(j),
            delay,
            angle,
            gain: (e.alpha_hat - t.alpha_ul).norm() / t.alpha_ul.norm().max(f64::MIN_POSITIVE),
        };
    }
    out
}

/// `||u - u_hat||^2 / ||u||^2` between the noiseless pilot of `truth` and the
/// pilot synthesized from the estimates.
pub fn uplink_nmse(truth: &[PathParams], est: &EstimateSet, cfg: &SystemConfig) -> f64 {
    let u = truth
        .iter()
        .fold(CVec::zeros(cfg.subcarriers * cfg.antennas), |acc, p| acc + steering_u(p.tau, p.theta, cfg) * p.alpha_ul);
    (&u - est.synthesize(cfg)).norm_squared() / u.norm_squared().max(f64::MIN_POSITIVE)
}
