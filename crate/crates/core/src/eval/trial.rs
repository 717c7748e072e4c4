//! One end-to-end trial: drop, pilots, reconstruction, precoding, rates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{downlink_channel, downlink_gain, received_pilot, sample_scenario, Scenario};
use crate::ecm::reconstruct_csi;
use crate::error::Result;
use crate::linalg::CVec;
use crate::nomp::nomp_extract;
use crate::precoder::{
    build_forms, evaluate_beams, gpi_private_only, mmf_solve, mrt_precoder, rzf_precoder, CsiInput, PrecoderSolution,
};

use super::energy::energy_efficiency;
use super::latency::{breakdown, harq_rounds, HarqMode, LatencyBreakdown};
use super::{EvalConfig, Method};

const LATENCY_STREAM: u64 = 1;
const REDRAW_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    /// Worst-device rate on the true downlink channel, b/s/Hz.
    pub min_se: f64,
    /// Worst-device rate the precoder expected from its own CSI.
    pub design_min_se: f64,
    pub t_star: usize,
    pub harq_capped: bool,
    pub latency: LatencyBreakdown,
    pub energy_efficiency: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialDiagnostics {
    pub paths_detected: Vec<usize>,
    /// Mean over devices of `||h - h_hat||^2 / ||h||^2`.
    pub downlink_nmse: f64,
    pub regularized: usize,
    pub expected_fallback: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub snr_db: f64,
    pub eta: f64,
    pub outcomes: Vec<MethodOutcome>,
    pub diagnostics: TrialDiagnostics,
}

/// Worst-device rate of a design on the true channels. The common stream is
/// decoded only at the rate every device supports, so the split `c` is scaled
/// down when it exceeds `min_k R_c,k` on the true channel.
pub fn achieved_min_se(sol: &PrecoderSolution, h_true: &[CVec], noise_to_power: f64) -> f64 {
    let forms = build_forms(&CsiInput::perfect(h_true.to_vec(), noise_to_power));
    let v = forms.values(&sol.beams.fbar);
    let rp = v.private_rates();
    let rc_min = v.common_rates().into_iter().fold(f64::INFINITY, f64::min);
    let total = sol.allocation.total();
    let scale = if total > 0.0 { (rc_min / total).min(1.0) } else { 0.0 };
    rp.iter()
        .zip(&sol.allocation.c)
        .map(|(r, c)| r + c * scale)
        .fold(f64::INFINITY, f64::min)
}

struct Inputs {
    scenario: Scenario,
    with_ecm: CsiInput,
    h_true: Vec<CVec>,
    diagnostics: TrialDiagnostics,
}

fn reconstruct(ecfg: &EvalConfig, rng: &mut ChaCha8Rng) -> Result<Inputs> {
    let cfg = &ecfg.system;
    let f = cfg.downlink_eval_offset_hz();
    let scenario = sample_scenario(cfg, rng);
    let mut h_hat = Vec::with_capacity(cfg.devices);
    let mut phi = Vec::with_capacity(cfg.devices);
    let mut h_true = Vec::with_capacity(cfg.devices);
    let mut diag = TrialDiagnostics::default();
    let mut nmse = 0.0;
    for (k, dev) in scenario.devices.iter().enumerate() {
        let obs = received_pilot(dev, cfg, rng);
        let est = nomp_extract(&obs, cfg, &ecfg.nomp);
        // detected paths carry no identity, so path l borrows the l-th configured factor
        let eta: Vec<f64> = (0..est.paths.len())
            .map(|l| cfg.eta_for(k, l.min(cfg.paths - 1)))
            .collect();
        let csi = reconstruct_csi(&obs, &est, &eta, f, ecfg.ecm, cfg);
        let h = downlink_channel(dev, f, cfg);
        nmse += (&h - &csi.h_hat).norm_squared() / h.norm_squared().max(f64::MIN_POSITIVE);
        diag.paths_detected.push(est.paths.len());
        diag.regularized += csi.diagnostics.regularized as usize;
        diag.expected_fallback += csi.diagnostics.expected_fallback as usize;
        h_hat.push(csi.h_hat);
        phi.push(csi.phi);
        h_true.push(h);
    }
    diag.downlink_nmse = nmse / cfg.devices as f64;
    Ok(Inputs {
        scenario,
        with_ecm: CsiInput::new(h_hat, phi, cfg.noise_to_power())?,
        h_true,
        diagnostics: diag,
    })
}

fn design(method: Method, inputs: &Inputs, ecfg: &EvalConfig) -> Result<PrecoderSolution> {
    let solver = &ecfg.solver;
    let csi = &inputs.with_ecm;
    let forms = || build_forms(csi);
    match method {
        Method::Proposed => mmf_solve(csi, solver),
        Method::ProposedNoEcm => mmf_solve(&csi.without_covariance(), solver),
        Method::GpiNoRs => gpi_private_only(csi, solver),
        Method::Rzf => Ok(evaluate_beams(&rzf_precoder(csi), &forms(), false)),
        Method::Mrt => Ok(evaluate_beams(&mrt_precoder(csi), &forms(), false)),
        Method::GpiFeedback | Method::GpiFeedbackT2Max => {
            mmf_solve(&CsiInput::perfect(inputs.h_true.clone(), csi.noise_to_power), solver)
        }
    }
}

/// Rates for HARQ rounds `2, 3, ...` with freshly drawn downlink gains.
fn redraw_rate(sol: &PrecoderSolution, scenario: &Scenario, ecfg: &EvalConfig, rng: &mut ChaCha8Rng) -> f64 {
    let cfg = &ecfg.system;
    let var = cfg.path_gain_variance();
    let f = cfg.downlink_eval_offset_hz();
    let h: Vec<CVec> = scenario
        .devices
        .iter()
        .enumerate()
        .map(|(k, dev)| {
            let mut d = dev.clone();
            for (l, p) in d.paths.iter_mut().enumerate() {
                p.alpha_dl = downlink_gain(p.alpha_ul, cfg.eta_for(k, l), var, rng);
            }
            downlink_channel(&d, f, cfg)
        })
        .collect();
    achieved_min_se(sol, &h, cfg.noise_to_power())
}

/// Runs every method in `methods` on one shared drop. Deterministic in `seed`.
pub fn run_trial(ecfg: &EvalConfig, methods: &[Method], trial: usize, seed: u64) -> Result<TrialRecord> {
    let cfg = &ecfg.system;
    let lat = &ecfg.latency;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = reconstruct(ecfg, &mut rng)?;
    let mut lat_rng = ChaCha8Rng::seed_from_u64(seed);
    lat_rng.set_stream(LATENCY_STREAM);

    let mut outcomes = Vec::with_capacity(methods.len());
    let mut feedback_cache: Option<Result<PrecoderSolution, String>> = None;
    for &method in methods {
        let sol = if method.uses_feedback() {
            feedback_cache
                .get_or_insert_with(|| design(method, &inputs, ecfg).map_err(|e| e.to_string()))
                .clone()
        } else {
            design(method, &inputs, ecfg).map_err(|e| e.to_string())
        };
        // one draw per method whether or not it fails, so streams stay aligned
        let per_round: f64 = rand::Rng::random(&mut lat_rng);
        let outcome = match sol {
            Ok(sol) => {
                let min_se = achieved_min_se(&sol, &inputs.h_true, cfg.noise_to_power());
                let harq = match lat.harq_mode {
                    HarqMode::FixedChannel => {
                        harq_rounds(&[min_se], lat.payload_bits, lat.bandwidth_hz, lat.slot_air_time_s, lat.harq_cap)
                    }
                    HarqMode::Redraw => {
                        let mut redraw = ChaCha8Rng::seed_from_u64(seed);
                        redraw.set_stream(REDRAW_STREAM);
                        let per_round_bits = lat.bandwidth_hz * lat.slot_air_time_s;
                        let mut rates = vec![min_se];
                        let mut acc = min_se * per_round_bits;
                        while acc < lat.payload_bits && rates.len() < lat.harq_cap {
                            let r = redraw_rate(&sol, &inputs.scenario, ecfg, &mut redraw);
                            acc += r.max(0.0) * per_round_bits;
                            rates.push(r);
                        }
                        harq_rounds(&rates, lat.payload_bits, lat.bandwidth_hz, lat.slot_air_time_s, lat.harq_cap)
                    }
                };
                let per_round_ms = lat.t3_min_ms + (lat.t3_max_ms - lat.t3_min_ms) * per_round;
                let latency = breakdown(method, harq.rounds, per_round_ms, lat);
                MethodOutcome {
                    method,
                    min_se,
                    design_min_se: sol.objective,
                    t_star: harq.rounds,
                    harq_capped: harq.capped,
                    latency,
                    energy_efficiency: energy_efficiency(
                        min_se,
                        cfg.devices,
                        cfg.transmit_power(),
                        method.uses_feedback(),
                        &ecfg.energy,
                    ),
                    failed: false,
                }
            }
            Err(msg) => {
                log::warn!("trial {trial} ({method}): {msg}");
                MethodOutcome {
                    method,
                    min_se: 0.0,
                    design_min_se: 0.0,
                    t_star: lat.harq_cap,
                    harq_capped: true,
                    latency: breakdown(method, lat.harq_cap, lat.t3_max_ms, lat),
                    energy_efficiency: 0.0,
                    failed: true,
                }
            }
        };
        outcomes.push(outcome);
    }
    Ok(TrialRecord {
        trial,
        seed,
        snr_db: cfg.snr_db,
        eta: cfg.eta,
        outcomes,
        diagnostics: inputs.diagnostics,
    })
}
