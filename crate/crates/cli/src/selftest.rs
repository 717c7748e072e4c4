//! Fast invariant checks, runnable on any build.

use fdd_sim::channel::complex_gaussian;
use fdd_sim::ecm::ecm_with_reciprocity;
use fdd_sim::eval::latency::breakdown;
use fdd_sim::eval::{run_trial, EnergyConfig, LatencyConfig};
use fdd_sim::linalg::dominant_eigenvector;
use fdd_sim::precoder::{gpi_step, mmf_solve, waterfill_common};
use fdd_sim::{BlockDiag, CMat, CVec, CsiInput, EvalConfig, Method, SolverConfig, SystemConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<(), String>;

const CHECKS: &[(&str, Check)] = &[
    ("waterfill-budget", waterfill_budget),
    ("gpi-eigenvector", gpi_eigenvector),
    ("ecm-endpoints", ecm_endpoints),
    ("single-user-rate", single_user_rate),
    ("latency-arithmetic", latency_arithmetic),
    ("dac-power", dac_power),
    ("trial-determinism", trial_determinism),
];

/// Runs every check, printing one line each. Returns the failure count.
pub fn run() -> usize {
    let mut failed = 0;
    for (name, check) in CHECKS {
        match check() {
            Ok(()) => println!("ok   {name}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name}: {msg}");
            }
        }
    }
    failed
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn waterfill_budget() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let rp: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..4.0)).collect();
        let budget = rng.random_range(0.0..3.0);
        let c = waterfill_common(&rp, budget).c;
        let total: f64 = c.iter().sum();
        ensure((total - budget).abs() <= 1e-12, || format!("sum {total} vs budget {budget}"))?;
        ensure(c.iter().all(|&v| v >= 0.0), || format!("negative entry in {c:?}"))?;
    }
    Ok(())
}

fn gpi_eigenvector() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 6;
    let b = CMat::from_fn(n, n, |_, _| complex_gaussian(1.0, &mut rng));
    let x = &b * b.adjoint() + CMat::identity(n, n);
    let xs = BlockDiag::from_blocks(vec![x.clone()]);
    let ys = BlockDiag::from_blocks(vec![CMat::identity(n, n)]);
    let mut f = CVec::from_fn(n, |_, _| complex_gaussian(1.0, &mut rng));
    for _ in 0..5000 {
        f = gpi_step(&f, &xs, &ys).fbar;
    }
    let v = dominant_eigenvector(&x);
    let cos = f.dotc(&v).norm() / (f.norm() * v.norm());
    let angle = cos.min(1.0).acos();
    ensure(angle < 1e-6, || format!("angle {angle:e} rad"))
}

fn ecm_endpoints() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let b = CMat::from_fn(4, 4, |_, _| complex_gaussian(1.0, &mut rng));
    let c = &b * b.adjoint();
    let one = ecm_with_reciprocity(&c, &[1.0; 3]).0;
    let zero = ecm_with_reciprocity(&c, &[0.0; 3]).0;
    ensure((one - &c).norm() <= 1e-12 * c.norm(), || "eta = 1 does not give C".into())?;
    ensure(zero == CMat::identity(4, 4), || "eta = 0 does not give I".into())
}

fn single_user_rate() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = CVec::from_fn(4, |_, _| complex_gaussian(0.25, &mut rng));
    let s = 0.01;
    let csi = CsiInput::perfect(vec![h.clone()], s);
    let sol = mmf_solve(&csi, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let want = (1.0 + h.norm_squared() / s).log2();
    ensure((sol.objective - want).abs() < 1e-6 * want, || format!("{} vs {want}", sol.objective))
}

fn latency_arithmetic() -> Result<(), String> {
    let cfg = LatencyConfig::default();
    let free = breakdown(Method::Proposed, 1, 2.0, &cfg).total_ms;
    let fb = breakdown(Method::GpiFeedback, 1, 2.0, &cfg).total_ms;
    ensure((free - 2.116).abs() < 1e-12 && (fb - 8.116).abs() < 1e-12, || format!("{free} / {fb} ms"))
}

fn dac_power() -> Result<(), String> {
    let p = EnergyConfig::default().p_dac();
    ensure((p - 0.99744).abs() < 1e-12, || format!("{p} W"))
}

fn trial_determinism() -> Result<(), String> {
    let cfg = EvalConfig {
        system: SystemConfig {
            antennas: 4,
            devices: 2,
            paths: 2,
            subcarriers: 16,
            ..SystemConfig::default()
        },
        ..EvalConfig::default()
    };
    let a = run_trial(&cfg, &Method::ALL, 0, 11).map_err(|e| e.to_string())?;
    let b = run_trial(&cfg, &Method::ALL, 0, 11).map_err(|e| e.to_string())?;
    ensure(a == b, || "same seed gave different records".into())
}
