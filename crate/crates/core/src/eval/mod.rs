//! Monte-Carlo harness: end-to-end trials, sweeps, latency and energy models,
//! and report emission.

pub mod energy;
pub mod latency;
pub mod report;
pub mod sweep;
pub mod trial;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::ecm::EcmOptions;
use crate::error::{Error, Result};
use crate::nomp::NompConfig;
use crate::precoder::SolverConfig;

pub use energy::{energy_efficiency, EnergyConfig};
pub use latency::{harq_rounds, latency_total, HarqMode, HarqOutcome, LatencyBreakdown, LatencyConfig};
pub use report::{emit_report, read_csv, resolve_out_dir, summarize, CsvRow, Manifest, PointSummary, Summary, OUT_DIR_ENV};
pub use sweep::{eta_sweep, se_sweep, trial_seed, SweepResult};
pub use trial::{achieved_min_se, run_trial, MethodOutcome, TrialRecord};

/// Precoding schemes compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Rate-splitting GPI on reconstructed CSI with the error covariance.
    Proposed,
    /// Same solver with the error covariance set to zero.
    ProposedNoEcm,
    /// Private-stream GPI on reconstructed CSI with the error covariance.
    GpiNoRs,
    Rzf,
    Mrt,
    /// Rate-splitting GPI on perfect CSI obtained by feedback.
    GpiFeedback,
    /// As [`Method::GpiFeedback`] but charged the full `T2_max` compute time.
    GpiFeedbackT2Max,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Proposed,
        Method::ProposedNoEcm,
        Method::GpiNoRs,
        Method::Rzf,
        Method::Mrt,
        Method::GpiFeedback,
        Method::GpiFeedbackT2Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::ProposedNoEcm => "proposed-no-ecm",
            Method::GpiNoRs => "gpi-no-rs",
            Method::Rzf => "rzf",
            Method::Mrt => "mrt",
            Method::GpiFeedback => "gpi-feedback",
            Method::GpiFeedbackT2Max => "gpi-feedback-t2max",
        }
    }

    pub fn uses_feedback(self) -> bool {
        matches!(self, Method::GpiFeedback | Method::GpiFeedbackT2Max)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Everything a trial needs besides its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub system: SystemConfig,
    pub solver: SolverConfig,
    pub nomp: NompConfig,
    pub ecm: EcmOptions,
    pub latency: LatencyConfig,
    pub energy: EnergyConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            solver: SolverConfig::default(),
            nomp: NompConfig::default(),
            ecm: EcmOptions::default(),
            latency: LatencyConfig::default(),
            energy: EnergyConfig::default(),
        }
    }
}

impl EvalConfig {
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Loads a TOML file with optional `[system]`, `[solver]`, `[nomp]`,
    /// `[ecm]`, `[latency]` and `[energy]` tables and validates it.
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
        self.system.validate()?;
        self.solver.validate()?;
        self.latency.validate()?;
        self.energy.validate()
    }
}
