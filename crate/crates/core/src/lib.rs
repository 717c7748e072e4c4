//! Feedback-free FDD downlink MIMO simulation.
//!
//! The pipeline runs per trial: draw a multipath [`Scenario`], observe the
//! uplink pilot, extract path parameters with 2D-NOMP ([`nomp`]), rebuild the
//! downlink channel and approximate its error covariance from the observed
//! Fisher information ([`ecm`]), then design a max-min-fair rate-splitting
//! precoder ([`precoder`]). [`eval`] runs Monte-Carlo sweeps and the latency
//! and energy models on top.

pub mod channel;
pub mod config;
pub mod error;
pub mod linalg;
pub mod ecm;
pub mod nomp;
pub mod precoder;
pub mod eval;

pub use channel::{ChannelVector, DeviceGeometry, PathParams, PilotObservation, Scenario};
pub use config::SystemConfig;
pub use error::{Error, Result};
pub use linalg::{BlockDiag, CMat, CVec, RMat, C64};
pub use ecm::{DecorrelationFloor, Ecm, EcmMode, EcmOptions, ReconstructedCsi};
pub use nomp::{EstimateSet, EstimatedPath, NompConfig};
pub use precoder::{BeamStack, CsiInput, PrecoderSolution, RateAllocation, SolverConfig};
pub use eval::{EvalConfig, Method, TrialRecord};
