//! HARQ round count and the three-part latency model.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::Method;

/// How the channel evolves across HARQ rounds within a trial.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HarqMode {
    /// Rates are held fixed across rounds.
    #[default]
    FixedChannel,
    /// Downlink path gains are redrawn every round; the precoder is not redesigned.
    Redraw,
}

/// Precoder compute time as a fraction of `t2_max_ms`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComputeRatios {
    pub proposed: f64,
    pub gpi_no_rs: f64,
    pub rzf: f64,
    pub mrt: f64,
}

impl Default for ComputeRatios {
    /// `proposed` is the reference; the others are single-core timings of
    /// this implementation (N = 12, K = 4) scaled to it.
    fn default() -> Self {
        Self {
            proposed: 0.116,
            gpi_no_rs: 7.4e-3,
            rzf: 7e-6,
            mrt: 3e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyConfig {
    pub t1_feedback_ms: f64,
    pub t1_feedback_free_ms: f64,
    pub t2_max_ms: f64,
    pub ratios: ComputeRatios,
    /// Per-round latency is drawn uniformly from `[t3_min_ms, t3_max_ms]`.
    pub t3_min_ms: f64,
    pub t3_max_ms: f64,
    pub slot_air_time_s: f64,
    pub bandwidth_hz: f64,
    pub payload_bits: f64,
    pub harq_cap: usize,
    pub harq_mode: HarqMode,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        Self {
            t1_feedback_ms: 6.0,
            t1_feedback_free_ms: 0.0,
            t2_max_ms: 1.0,
            ratios: ComputeRatios::default(),
            t3_min_ms: 1.5,
            t3_max_ms: 2.5,
            slot_air_time_s: 0.5e-3,
            bandwidth_hz: 20e6,
            payload_bits: 25_000.0,
            harq_cap: 100,
            harq_mode: HarqMode::FixedChannel,
        }
    }
}

impl LatencyConfig {
    pub fn validate(&self) -> Result<()> {
        let r = &self.ratios;
        let durations = [
            self.t1_feedback_ms,
            self.t1_feedback_free_ms,
            self.t2_max_ms,
            self.t3_min_ms,
            r.proposed,
            r.gpi_no_rs,
            r.rzf,
            r.mrt,
        ];
        if durations.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("latency durations and ratios must be >= 0".into()));
        }
        if !(self.t3_max_ms >= self.t3_min_ms) {
            return Err(Error::Config("t3_max_ms must be >= t3_min_ms".into()));
        }
        if !(self.payload_bits > 0.0 && self.bandwidth_hz > 0.0 && self.slot_air_time_s > 0.0) {
            return Err(Error::Config("payload, bandwidth and air time must be positive".into()));
        }
        if self.harq_cap == 0 {
            return Err(Error::Config("harq_cap must be >= 1".into()));
        }
        Ok(())
    }

    pub fn t1_ms(&self, method: Method) -> f64 {
        if method.uses_feedback() {
            self.t1_feedback_ms
        } else {
            self.t1_feedback_free_ms
        }
    }

    pub fn t2_ms(&self, method: Method) -> f64 {
        let r = &self.ratios;
        let ratio = match method {
            Method::Proposed | Method::ProposedNoEcm | Method::GpiFeedback => r.proposed,
            Method::GpiNoRs => r.gpi_no_rs,
            Method::Rzf => r.rzf,
            Method::Mrt => r.mrt,
            Method::GpiFeedbackT2Max => 1.0,
        };
        ratio * self.t2_max_ms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarqOutcome {
    pub rounds: usize,
    /// The payload was not delivered within the cap; `rounds` equals the cap.
    pub capped: bool,
}

/// Smallest `T` with `sum_{t <= T} rate[t] * W * air_time >= payload`.
/// Rounds past the end of `rates` repeat its last entry.
pub fn harq_rounds(rates: &[f64], payload_bits: f64, bandwidth_hz: f64, air_time_s: f64, cap: usize) -> HarqOutcome {
    assert!(!rates.is_empty(), "at least one round rate is required");
    let per_bit = bandwidth_hz * air_time_s;
    let mut acc = 0.0;
    for t in 0..cap {
        let r = rates[t.min(rates.len() - 1)].max(0.0);
        acc += r * per_bit;
        // tolerate rounding when the rate is an exact divisor of the payload
        if acc >= payload_bits * (1.0 - 1e-12) {
            return HarqOutcome {
                rounds: t + 1,
                capped: false,
            };
        }
    }
    HarqOutcome { rounds: cap, capped: true }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub t1_ms: f64,
    pub t2_ms: f64,
    pub t3_ms: f64,
    pub total_ms: f64,
}

/// `T1 + T2 + T3` with `T3 = T* * U[t3_min, t3_max]`.
pub fn latency_total<R: Rng + ?Sized>(method: Method, t_star: usize, cfg: &LatencyConfig, rng: &mut R) -> LatencyBreakdown {
    assert!(t_star >= 1, "at least one HARQ round");
    let per_round = cfg.t3_min_ms + (cfg.t3_max_ms - cfg.t3_min_ms) * rng.random::<f64>();
    breakdown(method, t_star, per_round, cfg)
}

/// Same as [`latency_total`] with a given per-round latency.
pub fn breakdown(method: Method, t_star: usize, per_round_ms: f64, cfg: &LatencyConfig) -> LatencyBreakdown {
    let t1_ms = cfg.t1_ms(method);
    let t2_ms = cfg.t2_ms(method);
    let t3_ms = t_star as f64 * per_round_ms;
    LatencyBreakdown {
        t1_ms,
        t2_ms,
        t3_ms,
        total_ms: t1_ms + t2_ms + t3_ms,
    }
}
