//! Circuit-power energy-efficiency model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub p_lo_w: f64,
    pub p_rf_w: f64,
    /// Minimum channel length of the CMOS process, metres.
    pub l_min_m: f64,
    pub v_dd: f64,
    pub sampling_rate_hz: f64,
    pub adc_bits: u32,
    pub dac_bits: u32,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            p_lo_w: 22.5e-3,
            p_rf_w: 31.6e-3,
            l_min_m: 0.5e-6,
            v_dd: 3.0,
            sampling_rate_hz: 1e8,
            adc_bits: 16,
            dac_bits: 16,
        }
    }
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<()> {
        let vals = [self.p_lo_w, self.p_rf_w, self.l_min_m, self.v_dd, self.sampling_rate_hz];
        if vals.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.adc_bits == 0 || self.dac_bits == 0 {
            return Err(Error::Config("energy model parameters must be positive".into()));
        }
        Ok(())
    }

    /// `3 V_dd^2 L_min (f_s / 2) 10^(0.1525 b - 4.838)`.
    pub fn p_adc(&self) -> f64 {
        3.0 * self.v_dd * self.v_dd
            * self.l_min_m
            * (self.sampling_rate_hz / 2.0)
            * 10f64.powf(0.1525 * self.adc_bits as f64 - 4.838)
    }

    /// `1.5e-5 2^b + 9e-12 f_s b`.
    pub fn p_dac(&self) -> f64 {
        1.5e-5 * 2f64.powi(self.dac_bits as i32) + 9e-12 * self.sampling_rate_hz * self.dac_bits as f64
    }

    /// Circuit power of one feedback link.
    pub fn p_feedback(&self) -> f64 {
        2.0 * self.p_adc() + self.p_lo_w + 2.0 * self.p_dac() + self.p_rf_w
    }
}

/// `K * min_se / (P + sum_k (P_feedback + P_ADC))` in b/s/Hz per W.
pub fn energy_efficiency(min_se: f64, devices: usize, transmit_power_w: f64, feedback: bool, cfg: &EnergyConfig) -> f64 {
    let per_device = if feedback { cfg.p_feedback() } else { 0.0 } + cfg.p_adc();
    devices as f64 * min_se / (transmit_power_w + devices as f64 * per_device)
}
