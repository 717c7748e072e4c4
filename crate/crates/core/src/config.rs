//! Link-level system configuration.
//!
//! The configuration is a flat key/value table. All frequencies are in Hz,
//! lengths in metres, angles in radians, SNRs in dB. Derived quantities
//! (wavelengths, antenna spacing, duplex offset, noise powers) are methods
//! so a config file can never hold an inconsistent combination.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Duplex offsets above this fraction of the uplink carrier break the
/// frequency-invariance assumption on path geometry.
pub const MAX_INVARIANT_DUPLEX_FRACTION: f64 = 0.10;

const DEFAULT_DELAY_OFFSET: Option<f64> = Some(0.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// BS antennas (N).
    pub antennas: usize,
    /// Single-antenna devices (K).
    pub devices: usize,
    /// Propagation paths per device (L).
    pub paths: usize,
    /// Uplink pilot subcarriers (M).
    pub subcarriers: usize,
    pub subcarrier_spacing_hz: f64,
    pub uplink_carrier_hz: f64,
    pub downlink_carrier_hz: f64,
    /// Downlink noise variance.
    pub noise_variance: f64,
    /// Downlink SNR, P / noise_variance.
    pub snr_db: f64,
    /// Uplink pilot SNR, E||signal||^2 / E||noise||^2 over the full pilot.
    pub uplink_snr_db: f64,
    /// Explicit uplink pilot noise variance; overrides `uplink_snr_db`.
    pub pilot_noise_variance: Option<f64>,
    /// Uplink/downlink path-gain correlation, used for every (device, path)
    /// unless `eta_per_path` is given.
    pub eta: f64,
    /// Optional per-device, per-path correlation factors (K rows of L).
    pub eta_per_path: Option<Vec<Vec<f64>>>,
    pub angular_spread: f64,
    /// Frequency offset at which the downlink delay phase is evaluated.
    /// `None` uses the full carrier offset.
    pub downlink_delay_offset_hz: Option<f64>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            antennas: 12,
            devices: 4,
            paths: 5,
            subcarriers: 64,
            subcarrier_spacing_hz: 30e3,
            uplink_carrier_hz: 2.0e9,
            downlink_carrier_hz: 2.19e9,
            noise_variance: 1.0,
            snr_db: 30.0,
            uplink_snr_db: 10.0,
            pilot_noise_variance: None,
            eta: 0.9,
            eta_per_path: None,
            angular_spread: PI / 10.0,
            downlink_delay_offset_hz: DEFAULT_DELAY_OFFSET,
        }
    }
}

impl SystemConfig {
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Loads a config file and validates it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::from_toml_str(&text).map_err(|e| Error::ConfigParse {
            path: path.to_path_buf(),
            msg: e.message().replace('\n', " "),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.antennas == 0 || self.devices == 0 || self.paths == 0 || self.subcarriers == 0 {
            return fail("antennas, devices, paths and subcarriers must be >= 1".into());
        }
        for (name, v) in [
            ("subcarrier_spacing_hz", self.subcarrier_spacing_hz),
            ("uplink_carrier_hz", self.uplink_carrier_hz),
            ("downlink_carrier_hz", self.downlink_carrier_hz),
            ("noise_variance", self.noise_variance),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        if !self.snr_db.is_finite() || !self.uplink_snr_db.is_finite() {
            return fail("SNR values must be finite".into());
        }
        if let Some(v) = self.pilot_noise_variance {
            if !(v.is_finite() && v >= 0.0) {
                return fail(format!("pilot_noise_variance must be >= 0, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return fail(format!("eta must lie in [0, 1], got {}", self.eta));
        }
        if let Some(rows) = &self.eta_per_path {
            if rows.len() != self.devices || rows.iter().any(|r| r.len() != self.paths) {
                return fail("eta_per_path must be devices x paths".into());
            }
            if rows.iter().flatten().any(|e| !(0.0..=1.0).contains(e)) {
                return fail("eta_per_path entries must lie in [0, 1]".into());
            }
        }
        if let Some(v) = self.downlink_delay_offset_hz {
            if !v.is_finite() {
                return fail(format!("downlink_delay_offset_hz must be finite, got {v}"));
            }
        }
        if !(self.angular_spread >= 0.0 && self.angular_spread < PI / 2.0) {
            return fail(format!(
                "angular_spread must lie in [0, pi/2), got {}",
                self.angular_spread
            ));
        }
        let frac = self.duplex_offset_hz().abs() / self.uplink_carrier_hz;
        if frac > MAX_INVARIANT_DUPLEX_FRACTION {
            log::warn!(
                "duplex offset is {:.1}% of the carrier; path geometry may not be frequency invariant",
                100.0 * frac
            );
        }
        Ok(())
    }

    pub fn lambda_ul(&self) -> f64 {
        SPEED_OF_LIGHT / self.uplink_carrier_hz
    }

    pub fn lambda_dl(&self) -> f64 {
        SPEED_OF_LIGHT / self.downlink_carrier_hz
    }

    /// Half the uplink wavelength.
    pub fn antenna_spacing(&self) -> f64 {
        self.lambda_ul() / 2.0
    }

    /// Downlink minus uplink carrier frequency, the `f` of the downlink model.
    pub fn duplex_offset_hz(&self) -> f64 {
        self.downlink_carrier_hz - self.uplink_carrier_hz
    }

    /// The `f` handed to the downlink channel and its reconstruction.
    pub fn downlink_eval_offset_hz(&self) -> f64 {
        self.downlink_delay_offset_hz.unwrap_or_else(|| self.duplex_offset_hz())
    }

    /// Largest admissible path delay, `1 / delta_f`.
    pub fn max_delay(&self) -> f64 {
        1.0 / self.subcarrier_spacing_hz
    }

    /// Per-path gain variance `1 / (N L)`, which makes `E||h||^2 = 1`.
    pub fn path_gain_variance(&self) -> f64 {
        1.0 / (self.antennas * self.paths) as f64
    }

    pub fn transmit_power(&self) -> f64 {
        self.noise_variance * db_to_linear(self.snr_db)
    }

    /// `sigma^2 / P` as it enters the rate expressions.
    pub fn noise_to_power(&self) -> f64 {
        self.noise_variance / self.transmit_power()
    }

    /// Pilot noise variance. The expected pilot energy is `L * MN / (N L) = M`
    /// and the expected noise energy `MN sigma^2`, so the SNR target gives
    /// `sigma^2 = 1 / (N * snr)`.
    pub fn pilot_noise_variance(&self) -> f64 {
        self.pilot_noise_variance
            .unwrap_or_else(|| 1.0 / (self.antennas as f64 * db_to_linear(self.uplink_snr_db)))
    }

    pub fn eta_for(&self, device: usize, path: usize) -> f64 {
        match &self.eta_per_path {
            Some(rows) => rows[device][path],
            None => self.eta,
        }
    }

    /// Index of the first pilot subcarrier, `floor(-M/2)`.
    pub fn first_subcarrier_index(&self) -> i64 {
        (-(self.subcarriers as f64) / 2.0).floor() as i64
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
