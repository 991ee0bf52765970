//! Log-domain helpers shared by the likelihood and the estimator.

use statrs::distribution::{ContinuousCDF, Normal};

/// `ln Σ exp(v)` with max-shift. Returns `-inf` for an empty slice or when
/// every entry is `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// In-place log-softmax.
pub fn log_softmax_in_place(values: &mut [f64]) {
    let lse = log_sum_exp(values);
    for v in values.iter_mut() {
        *v -= lse;
    }
}

pub fn log_softmax(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    log_softmax_in_place(&mut out);
    out
}

pub fn softmax(values: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(values);
    values.iter().map(|v| (v - lse).exp()).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Upper quantile `z` with `P(Z > z) = tail`.
pub fn normal_upper_quantile(tail: f64) -> f64 {
    standard_normal().inverse_cdf(1.0 - tail)
}

/// Two-sided normal p-value for a z statistic.
pub fn two_sided_p(z: f64) -> f64 {
    2.0 * standard_normal().sf(z.abs())
}
