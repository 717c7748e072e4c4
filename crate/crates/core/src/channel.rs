//! Ground-truth multipath geometry, uplink/downlink channel vectors and
//! noisy uplink pilot observations.
//!
//! Path delay, angle and count are shared by both bands; only the complex
//! gains decorrelate across the duplex gap, controlled by `eta`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::linalg::{cis, CVec, C64};

/// Complex N-vector channel (one entry per BS antenna).
pub type ChannelVector = CVec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    /// Delay in seconds, within `[0, 1/delta_f]`.
    pub tau: f64,
    /// Angle in radians, within `(-pi/2, pi/2)`.
    pub theta: f64,
    pub alpha_ul: C64,
    pub alpha_dl: C64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceGeometry {
    pub mean_angle: f64,
    pub paths: Vec<PathParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub devices: Vec<DeviceGeometry>,
}

impl Scenario {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

/// Stacked uplink pilot across `M` subcarriers x `N` antennas, subcarrier
/// major: entry `i * N + n` is subcarrier `i`, antenna `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservation {
    pub samples: CVec,
    pub subcarriers: usize,
    pub antennas: usize,
}

impl PilotObservation {
    pub fn new(samples: CVec, subcarriers: usize, antennas: usize) -> Self {
        assert_eq!(samples.len(), subcarriers * antennas, "pilot length must be M*N");
        Self {
            samples,
            subcarriers,
            antennas,
        }
    }
}

/// ULA response: entry `n` is `exp(j 2 pi n (d / lambda) sin(theta))`.
pub fn array_response(theta: f64, lambda: f64, antennas: usize, spacing: f64) -> ChannelVector {
    let step = 2.0 * PI * (spacing / lambda) * theta.sin();
    CVec::from_fn(antennas, |n, _| cis(step * n as f64))
}

/// Stacked uplink steering vector `u(tau, theta)`: sub-block `i` is the
/// uplink array response times `exp(-j 2 pi (floor(-M/2) + i) delta_f tau)`.
pub fn steering_u(tau: f64, theta: f64, cfg: &SystemConfig) -> CVec {
    let n = cfg.antennas;
    let a = array_response(theta, cfg.lambda_ul(), n, cfg.antenna_spacing());
    let m0 = cfg.first_subcarrier_index();
    let mut out = CVec::zeros(cfg.subcarriers * n);
    for i in 0..cfg.subcarriers {
        let phase = cis(-2.0 * PI * (m0 + i as i64) as f64 * cfg.subcarrier_spacing_hz * tau);
        for (k, ak) in a.iter().enumerate() {
            out[i * n + k] = ak * phase;
        }
    }
    out
}

/// `u(tau, theta)` together with its first and second partial derivatives.
#[derive(Debug, Clone)]
pub struct SteeringDerivatives {
    pub u: CVec,
    pub d_tau: CVec,
    pub d_theta: CVec,
    pub d_tau_tau: CVec,
    pub d_theta_theta: CVec,
    pub d_tau_theta: CVec,
}

/// Closed-form partials of the stacked steering vector. Entry `(i, n)` of
/// `u` picks up `-j 2 pi m_i delta_f` per delay derivative and
/// `j 2 pi n (d / lambda) cos(theta)` per angle derivative.
pub fn steering_derivatives(tau: f64, theta: f64, cfg: &SystemConfig) -> SteeringDerivatives {
    let n_ant = cfg.antennas;
    let len = cfg.subcarriers * n_ant;
    let u = steering_u(tau, theta, cfg);
    let c = 2.0 * PI * cfg.antenna_spacing() / cfg.lambda_ul();
    let (s, co) = theta.sin_cos();
    let m0 = cfg.first_subcarrier_index();
    let mut d_tau = CVec::zeros(len);
    let mut d_theta = CVec::zeros(len);
    let mut d_tau_tau = CVec::zeros(len);
    let mut d_theta_theta = CVec::zeros(len);
    let mut d_tau_theta = CVec::zeros(len);
    for i in 0..cfg.subcarriers {
        let ft = C64::new(0.0, -2.0 * PI * (m0 + i as i64) as f64 * cfg.subcarrier_spacing_hz);
        for n in 0..n_ant {
            let idx = i * n_ant + n;
            let cn = c * n as f64;
            let fa = C64::new(0.0, cn * co);
            let faa = C64::new(-(cn * co) * (cn * co), -cn * s);
            let ui = u[idx];
            d_tau[idx] = ft * ui;
            d_theta[idx] = fa * ui;
            d_tau_tau[idx] = ft * ft * ui;
            d_theta_theta[idx] = faa * ui;
            d_tau_theta[idx] = ft * fa * ui;
        }
    }
    SteeringDerivatives {
        u,
        d_tau,
        d_theta,
        d_tau_tau,
        d_theta_theta,
        d_tau_theta,
    }
}

/// Circularly symmetric complex Gaussian sample with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(s * re, s * im)
}

/// Downlink gain correlated with the uplink gain:
/// `eta * alpha_ul + sqrt(1 - eta^2) * g`, `g ~ CN(0, path_variance)`.
pub fn downlink_gain<R: Rng + ?Sized>(
    alpha_ul: C64,
    eta: f64,
    path_variance: f64,
    rng: &mut R,
) -> C64 {
    debug_assert!((0.0..=1.0).contains(&eta));
    // always draw so the RNG stream does not depend on eta
    let g = complex_gaussian(path_variance, rng);
    alpha_ul * eta + g * (1.0 - eta * eta).max(0.0).sqrt()
}

/// Draws one drop: per-device mean angle, per-path angle/delay/gains.
pub fn sample_scenario<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Scenario {
    let spread = cfg.angular_spread;
    let half_range = PI / 2.0 - spread;
    let variance = cfg.path_gain_variance();
    let delay = Uniform::new_inclusive(0.0, cfg.max_delay()).expect("positive delay range");
    let devices = (0..cfg.devices)
        .map(|k| {
            let mean_angle = if half_range > 0.0 {
                rng.random_range(-half_range..half_range)
            } else {
                0.0
            };
            let paths = (0..cfg.paths)
                .map(|l| {
                    let offset = if spread > 0.0 {
                        rng.random_range(-spread / 2.0..spread / 2.0)
                    } else {
                        0.0
                    };
                    let tau = delay.sample(rng);
                    let alpha_ul = complex_gaussian(variance, rng);
                    let alpha_dl = downlink_gain(alpha_ul, cfg.eta_for(k, l), variance, rng);
                    PathParams {
                        tau,
                        theta: mean_angle + offset,
                        alpha_ul,
                        alpha_dl,
                    }
                })
                .collect();
            DeviceGeometry { mean_angle, paths }
        })
        .collect();
    Scenario { devices }
}

/// Uplink channel at baseband offset `f_ul` from the uplink carrier.
pub fn uplink_channel(device: &DeviceGeometry, f_ul: f64, cfg: &SystemConfig) -> ChannelVector {
    let (lambda, d) = (cfg.lambda_ul(), cfg.antenna_spacing());
    device.paths.iter().fold(CVec::zeros(cfg.antennas), |acc, p| {
        acc + array_response(p.theta, lambda, cfg.antennas, d) * (p.alpha_ul * cis(-2.0 * PI * f_ul * p.tau))
    })
}

/// Downlink channel at offset `f` from the uplink carrier.
pub fn downlink_channel(device: &DeviceGeometry, f: f64, cfg: &SystemConfig) -> ChannelVector {
    let (lambda, d) = (cfg.lambda_dl(), cfg.antenna_spacing());
    device.paths.iter().fold(CVec::zeros(cfg.antennas), |acc, p| {
        acc + array_response(p.theta, lambda, cfg.antennas, d) * (p.alpha_dl * cis(-2.0 * PI * f * p.tau))
    })
}

/// Noiseless stacked pilot `sum_l alpha_ul,l u(tau_l, theta_l)`.
pub fn pilot_signal(device: &DeviceGeometry, cfg: &SystemConfig) -> CVec {
    device
        .paths
        .iter()
        .fold(CVec::zeros(cfg.subcarriers * cfg.antennas), |acc, p| {
            acc + steering_u(p.tau, p.theta, cfg) * p.alpha_ul
        })
}

/// All-ones pilot through the uplink channel plus `CN(0, sigma_est^2 I)` noise.
pub fn received_pilot<R: Rng + ?Sized>(
    device: &DeviceGeometry,
    cfg: &SystemConfig,
    rng: &mut R,
) -> PilotObservation {
    let mut y = pilot_signal(device, cfg);
    let var = cfg.pilot_noise_variance();
    if var > 0.0 {
        for v in y.iter_mut() {
            *v += complex_gaussian(var, rng);
        }
    }
    PilotObservation::new(y, cfg.subcarriers, cfg.antennas)
}
