//! Common-rate split: `C_k = (mu - R_p,k)^+` with `sum_k C_k = budget`.

use super::RateAllocation;

/// Exact water level by sorting; no iteration.
pub fn waterfill_common(private_rates: &[f64], budget: f64) -> RateAllocation {
    let k = private_rates.len();
    debug_assert!(budget >= 0.0 || budget.is_nan(), "negative common budget");
    if k == 0 || !(budget > 0.0) {
        return RateAllocation::zeros(k);
    }
    let mut sorted = private_rates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut mu = f64::NAN;
    let mut prefix = 0.0;
    for j in 0..k {
        prefix += sorted[j];
        let level = (budget + prefix) / (j + 1) as f64;
        if j + 1 == k || level <= sorted[j + 1] {
            mu = level;
            break;
        }
    }
    let mut c: Vec<f64> = private_rates.iter().map(|&r| (mu - r).max(0.0)).collect();
    // absorb rounding so the budget is met to the last ulp
    let active: Vec<usize> = (0..k).filter(|&i| c[i] > 0.0).collect();
    let err = budget - c.iter().sum::<f64>();
    if let Some(&i) = active.iter().max_by(|&&a, &&b| c[a].total_cmp(&c[b])) {
        c[i] = (c[i] + err).max(0.0);
    }
    RateAllocation { c }
}

/// `min_k (C_k + R_p,k)`.
pub fn min_total_rate(private_rates: &[f64], alloc: &RateAllocation) -> f64 {
    private_rates
        .iter()
        .zip(&alloc.c)
        .map(|(r, c)| r + c)
        .fold(f64::INFINITY, f64::min)
}
