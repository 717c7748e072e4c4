//! SNR and eta sweeps over independent trials.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::report::{rows_from_records, summarize, Summary};
use super::trial::{run_trial, TrialRecord};
use super::{EvalConfig, Method};

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `index` under `master`. Independent of the sweep point, so
/// every point sees the same drops.
pub fn trial_seed(master: u64, index: usize) -> u64 {
    mix(mix(master) ^ index as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
}

/// Worker count: `Some(1)` runs serially, `None` uses rayon's default pool.
fn run_point(
    ecfg: &EvalConfig,
    methods: &[Method],
    trials: usize,
    master_seed: u64,
    threads: Option<usize>,
) -> Result<Vec<TrialRecord>> {
    let one = |i: usize| run_trial(ecfg, methods, i, trial_seed(master_seed, i));
    match threads {
        Some(1) => (0..trials).map(one).collect(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| (0..trials).into_par_iter().map(one).collect()),
        None => (0..trials).into_par_iter().map(one).collect(),
    }
}

fn sweep<F>(
    base: &EvalConfig,
    points: &[f64],
    set: F,
    methods: &[Method],
    trials: usize,
    master_seed: u64,
    threads: Option<usize>,
) -> Result<SweepResult>
where
    F: Fn(&mut EvalConfig, f64),
{
    if trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    if methods.is_empty() {
        return Err(Error::Config("at least one method is required".into()));
    }
    let mut records = Vec::with_capacity(points.len() * trials);
    for &p in points {
        let mut cfg = base.clone();
        set(&mut cfg, p);
        cfg.validate()?;
        records.extend(run_point(&cfg, methods, trials, master_seed, threads)?);
    }
    let summary = summarize(&rows_from_records(&records));
    Ok(SweepResult { records, summary })
}

/// Min-SE against downlink SNR, with `P / sigma^2` set from each SNR.
pub fn se_sweep(
    base: &EvalConfig,
    snr_db: &[f64],
    methods: &[Method],
    trials: usize,
    master_seed: u64,
    threads: Option<usize>,
) -> Result<SweepResult> {
    sweep(base, snr_db, |c, v| c.system.snr_db = v, methods, trials, master_seed, threads)
}

/// Min-SE against the uplink/downlink gain correlation at a fixed SNR.
pub fn eta_sweep(
    base: &EvalConfig,
    etas: &[f64],
    snr_db: f64,
    methods: &[Method],
    trials: usize,
    master_seed: u64,
    threads: Option<usize>,
) -> Result<SweepResult> {
    sweep(
        base,
        etas,
        |c, v| {
            c.system.snr_db = snr_db;
            c.system.eta = v;
            c.system.eta_per_path = None;
        },
        methods,
        trials,
        master_seed,
        threads,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SystemConfig;

    fn small() -> EvalConfig {
        EvalConfig {
            system: SystemConfig {
                antennas: 4,
                devices: 2,
                paths: 2,
                subcarriers: 16,
                ..SystemConfig::default()
            },
            ..EvalConfig::default()
        }
    }

    #[test]
    fn seeds_differ_across_trials_and_masters() {
        let a: Vec<u64> = (0..100).map(|i| trial_seed(7, i)).collect();
        let mut s = a.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 100);
        assert_ne!(trial_seed(7, 0), trial_seed(8, 0));
    }

    #[test]
    fn single_point_single_trial_equals_run_trial() {
        let cfg = small();
        let methods = [Method::Proposed, Method::Rzf];
        let res = se_sweep(&cfg, &[cfg.system.snr_db], &methods, 1, 3, Some(1)).unwrap();
        let direct = run_trial(&cfg, &methods, 0, trial_seed(3, 0)).unwrap();
        assert_eq!(res.records, vec![direct]);
    }

    #[test]
    fn serial_and_parallel_agree() {
        let cfg = small();
        let methods = [Method::Proposed, Method::Mrt];
        let a = se_sweep(&cfg, &[0.0, 20.0], &methods, 4, 9, Some(1)).unwrap();
        let b = se_sweep(&cfg, &[0.0, 20.0], &methods, 4, 9, Some(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(se_sweep(&small(), &[10.0], &[Method::Mrt], 0, 1, Some(1)).is_err());
    }

    #[test]
    fn eta_sweep_sets_point() {
        let res = eta_sweep(&small(), &[1.0, 0.5], 25.0, &[Method::Mrt], 2, 1, Some(1)).unwrap();
        assert_eq!(res.records.len(), 4);
        assert!(res.records.iter().all(|r| r.snr_db == 25.0));
        assert_eq!(res.records[0].eta, 1.0);
        assert_eq!(res.records[3].eta, 0.5);
    }
}
