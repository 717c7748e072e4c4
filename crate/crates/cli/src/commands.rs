use std::fs;
use std::path::{Path, PathBuf};

use fdd_sim::channel::{received_pilot, sample_scenario};
use fdd_sim::config::linear_to_db;
use fdd_sim::eval::report::ReportPaths;
use fdd_sim::eval::{emit_report, eta_sweep, resolve_out_dir, se_sweep, Manifest, SweepResult};
use fdd_sim::nomp::{match_paths, nomp_extract, uplink_nmse};
use fdd_sim::{EvalConfig, Method};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::args::{Command, Common};
use crate::error::CliError;
use crate::selftest;

/// Defaults, then the config file, then flags.
fn load_config(common: &Common) -> Result<EvalConfig, CliError> {
    let cfg = match &common.config {
        Some(path) => EvalConfig::load(path).map_err(|e| match e {
            fdd_sim::Error::Io { path, source } => CliError::Config(format!("{}: {source}", path.display())),
            other => other.into(),
        })?,
        None => EvalConfig::default(),
    };
    Ok(cfg)
}

/// Creates the directory and proves it is writable before any trial runs.
fn prepare_out_dir(common: &Common) -> Result<PathBuf, CliError> {
    let dir = resolve_out_dir(common.out.as_deref());
    fs::create_dir_all(&dir).map_err(|e| CliError::output(&dir, e))?;
    let probe = dir.join(".fdd-sim-write-probe");
    fs::write(&probe, b"").map_err(|e| CliError::output(&dir, e))?;
    let _ = fs::remove_file(&probe);
    Ok(dir)
}

fn methods(common: &Common) -> Vec<Method> {
    common.methods.clone().unwrap_or_else(|| Method::ALL.to_vec())
}

fn threads(common: &Common) -> Option<usize> {
    common.threads.map(|t| t as usize)
}

fn write_report(
    dir: &Path,
    res: &SweepResult,
    common: &Common,
    cfg: &EvalConfig,
    snr: Vec<f64>,
    eta: Vec<f64>,
) -> Result<ReportPaths, CliError> {
    let argv: Vec<String> = std::env::args().collect();
    let mut manifest = Manifest::new(&argv.join(" "), common.seed, common.trials as usize, &methods(common), cfg);
    manifest.snr_db = snr;
    manifest.eta = eta;
    manifest.threads = threads(common);
    emit_report(dir, &res.records, &manifest).map_err(|e| match e {
        fdd_sim::Error::Io { path, source } => CliError::output(path, source),
        other => other.into(),
    })
}

fn print_se(res: &SweepResult) {
    println!("{:<20} {:>7} {:>5} {:>9} {:>8} {:>9} {:>10} {:>5}", "method", "snr_db", "eta", "min_se", "stderr", "p90_ms", "ee", "fail");
    for p in &res.summary.points {
        println!(
            "{:<20} {:>7.1} {:>5.2} {:>9.4} {:>8.4} {:>9.3} {:>10.3e} {:>5}",
            p.method.name(),
            p.snr_db,
            p.eta,
            p.mean_min_se,
            p.stderr_min_se,
            p.latency.p90_ms,
            p.mean_ee,
            p.failures
        );
    }
}

fn print_paths(paths: &ReportPaths) {
    println!("wrote {}", paths.csv.display());
    println!("wrote {}", paths.summary.display());
    println!("wrote {}", paths.manifest.display());
}

pub fn dispatch(command: Command, common: &Common) -> Result<(), CliError> {
    let mut cfg = load_config(common)?;
    let trials = common.trials as usize;
    match command {
        Command::SweepSe { snr } | Command::Energy { snr } => {
            cfg.validate()?;
            let dir = prepare_out_dir(common)?;
            info!("{} SNR points x {trials} trials", snr.0.len());
            let res = se_sweep(&cfg, &snr.0, &methods(common), trials, common.seed, threads(common))?;
            let paths = write_report(&dir, &res, common, &cfg, snr.0, vec![cfg.system.eta])?;
            print_se(&res);
            print_paths(&paths);
        }
        Command::SweepEta { eta, snr } => {
            cfg.validate()?;
            let dir = prepare_out_dir(common)?;
            let res = eta_sweep(&cfg, &eta.0, snr, &methods(common), trials, common.seed, threads(common))?;
            let paths = write_report(&dir, &res, common, &cfg, vec![snr], eta.0)?;
            print_se(&res);
            print_paths(&paths);
        }
        Command::Latency { snr, payload, harq_mode } => {
            if let Some(p) = payload {
                cfg.latency.payload_bits = p;
            }
            if let Some(m) = harq_mode {
                cfg.latency.harq_mode = m.into();
            }
            cfg.validate()?;
            let dir = prepare_out_dir(common)?;
            let res = se_sweep(&cfg, &[snr], &methods(common), trials, common.seed, threads(common))?;
            let paths = write_report(&dir, &res, common, &cfg, vec![snr], vec![cfg.system.eta])?;
            println!("{:<20} {:>9} {:>9} {:>9} {:>9}", "method", "mean_ms", "p50_ms", "p90_ms", "max_ms");
            for p in &res.summary.points {
                println!(
                    "{:<20} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
                    p.method.name(),
                    p.mean_latency_ms,
                    p.latency.p50_ms,
                    p.latency.p90_ms,
                    p.latency.max_ms
                );
            }
            print_paths(&paths);
        }
        Command::Estimate { uplink_snr } => {
            if let Some(s) = uplink_snr {
                cfg.system.uplink_snr_db = s;
                cfg.system.pilot_noise_variance = None;
            }
            cfg.validate()?;
            estimate(&cfg, common.seed);
        }
        Command::Selftest => {
            let failed = selftest::run();
            if failed > 0 {
                return Err(CliError::Run(format!("{failed} selftest check(s) failed")));
            }
        }
    }
    Ok(())
}

fn estimate(cfg: &EvalConfig, seed: u64) {
    let sys = &cfg.system;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scenario = sample_scenario(sys, &mut rng);
    let dev = &scenario.devices[0];
    let obs = received_pilot(dev, sys, &mut rng);
    let est = nomp_extract(&obs, sys, &cfg.nomp);
    println!(
        "paths: true {} detected {} truncated {}",
        dev.paths.len(),
        est.paths.len(),
        est.truncated
    );
    println!("{:>4} {:>9} {:>11} {:>11} {:>10}", "path", "estimate", "delay_err", "angle_err", "gain_err");
    for e in match_paths(&dev.paths, &est, sys) {
        let idx = e.estimate.map_or("-".to_string(), |j| j.to_string());
        println!("{:>4} {:>9} {:>11.3e} {:>11.3e} {:>10.3e}", e.truth, idx, e.delay, e.angle, e.gain);
    }
    println!("uplink nmse {:.2} dB", linear_to_db(uplink_nmse(&dev.paths, &est, sys)));
}
