//! Two-stage max-min-fair solver: GPI on the beams, waterfilling on the common split.

use log::debug;

use crate::error::{Error, Result};
use crate::linalg::{dominant_eigenvector, outer, CMat, CVec, C64};

use super::forms::{build_forms, QuadraticForms};
use super::gpi::{gpi_step, kkt_matrices, lagrangian};
use super::waterfill::{min_total_rate, waterfill_common};
use super::{BeamStack, CsiInput, PrecoderSolution, RateAllocation, SolverConfig};

/// Rates at `fbar` with the common rate re-split by waterfilling. With
/// `rate_splitting == false` the common stream is ignored and `c = 0`.
pub fn evaluate_beams(beams: &BeamStack, forms: &QuadraticForms, rate_splitting: bool) -> PrecoderSolution {
    let v = forms.values(&beams.fbar);
    let rp = v.private_rates();
    let rc = v.common_rates();
    let allocation = if rate_splitting {
        let budget = rc.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
        waterfill_common(&rp, budget)
    } else {
        RateAllocation::zeros(rp.len())
    };
    PrecoderSolution {
        beams: beams.clone(),
        objective: min_total_rate(&rp, &allocation),
        allocation,
        private_rates: rp,
        common_rates: rc,
        gamma: None,
        gpi_iterations: 0,
    }
}

/// Common beam along the dominant eigenvector of `sum_k h_k h_k^H`,
/// private beams matched to their own channel.
pub fn stacked_mrt(csi: &CsiInput, with_common: bool) -> BeamStack {
    let n = csi.antennas();
    let k = csi.devices();
    let mut fbar = CVec::zeros(n * (k + 1));
    if with_common {
        let mut gram = CMat::zeros(n, n);
        for h in &csi.h_hat {
            gram += outer(h);
        }
        fbar.rows_mut(0, n).copy_from(&dominant_eigenvector(&gram));
    }
    for (i, h) in csi.h_hat.iter().enumerate() {
        fbar.rows_mut((i + 1) * n, n).copy_from(h);
    }
    BeamStack::new(fbar, n).normalized()
}

fn check_finite(f: &CVec) -> Result<()> {
    if f.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("precoder iterate"))
    }
}

/// Stage 1: GPI from `f` with `(c, gamma)` held fixed. Returns the final beams and the step count.
///
/// `Y^{-1} X f - f = Y^{-1} (X - Y) f` is a preconditioned ascent direction
/// of the Lagrangian, and the plain GPI update is the full step along it.
/// A full step is taken whenever it does not lower the Lagrangian; otherwise
/// the step is halved until it does. Fixed points are those of plain GPI.
pub fn stage_one(
    mut f: CVec,
    c: &RateAllocation,
    forms: &QuadraticForms,
    gamma: f64,
    cfg: &SolverConfig,
) -> Result<(CVec, usize)> {
    let n = forms.antennas;
    let mut value = lagrangian(&f, c, forms, gamma, cfg.alpha);
    let mut step: f64 = 1.0;
    for t in 1..=cfg.max_gpi_iters {
        let (x, y) = kkt_matrices(&f, c, forms, gamma, cfg.alpha);
        let full = gpi_step(&f, &x, &y).fbar;
        check_finite(&full)?;
        if (&full - &f).norm() < cfg.epsilon {
            return Ok((full, t));
        }
        // undo the normalization so the direction is Y^{-1}(X - Y) f
        let z = y.solve_hpd(&x.mul_vec(&f)).unwrap_or_else(|| full.clone());
        let dir = &z - &f;
        step = (2.0 * step).min(1.0);
        loop {
            let trial = if step == 1.0 {
                full.clone()
            } else {
                BeamStack::new(&f + &dir * C64::from(step), n).normalized().fbar
            };
            let v = lagrangian(&trial, c, forms, gamma, cfg.alpha);
            if v >= value || step < MIN_STEP {
                let moved = (&trial - &f).norm();
                f = trial;
                value = v;
                if moved < cfg.epsilon * MIN_STEP {
                    return Ok((f, t));
                }
                break;
            }
            step *= 0.5;
        }
    }
    Ok((f, cfg.max_gpi_iters))
}

const MIN_STEP: f64 = 1.0 / 1024.0;

fn better(a: &PrecoderSolution, b: &PrecoderSolution) -> bool {
    a.objective > b.objective
}

/// Proposed rate-splitting precoder. Sweeps `gamma_grid`; for each value
/// alternates GPI and waterfilling from the stacked-MRT start and keeps the
/// point with the largest `min_k (C_k + R_p,k)`.
pub fn mmf_solve(csi: &CsiInput, cfg: &SolverConfig) -> Result<PrecoderSolution> {
    csi.validate()?;
    cfg.validate()?;
    let forms = build_forms(csi);
    let k = csi.devices();
    let start = stacked_mrt(csi, true);
    let mut best = evaluate_beams(&start, &forms, true);
    let budget0 = best.common_rates.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    let c0 = RateAllocation {
        c: vec![budget0 / k as f64; k],
    };
    let mut total_iters = 0;
    for &gamma in &cfg.gamma_grid {
        let mut f = start.fbar.clone();
        let mut c = c0.clone();
        let mut previous = f64::NEG_INFINITY;
        for round in 0..cfg.outer_alternations.max(1) {
            let (next, iters) = stage_one(f, &c, &forms, gamma, cfg)?;
            total_iters += iters;
            f = next;
            let mut cand = evaluate_beams(&BeamStack::new(f.clone(), csi.antennas()), &forms, true);
            if !cand.objective.is_finite() {
                return Err(Error::NonFinite("precoder objective"));
            }
            c = cand.allocation.clone();
            let improvement = cand.objective - previous;
            previous = cand.objective;
            if better(&cand, &best) {
                cand.gamma = Some(gamma);
                best = cand;
            }
            debug!("gamma {gamma:.2} round {round}: objective {previous:.4}");
            if improvement < cfg.min_improvement {
                break;
            }
        }
    }
    best.gpi_iterations = total_iters;
    Ok(best)
}

/// GPI on the private streams only: `f_c = 0`, `c = 0`, no common-rate term.
pub fn gpi_private_only(csi: &CsiInput, cfg: &SolverConfig) -> Result<PrecoderSolution> {
    csi.validate()?;
    cfg.validate()?;
    let forms = build_forms(csi);
    let start = stacked_mrt(csi, false);
    let zero = RateAllocation::zeros(csi.devices());
    let (f, iters) = stage_one(start.fbar.clone(), &zero, &forms, 0.0, cfg)?;
    let mut best = evaluate_beams(&start, &forms, false);
    let cand = evaluate_beams(&BeamStack::new(f, csi.antennas()), &forms, false);
    if !cand.objective.is_finite() {
        return Err(Error::NonFinite("precoder objective"));
    }
    if better(&cand, &best) {
        best = cand;
    }
    best.gpi_iterations = iters;
    Ok(best)
}
