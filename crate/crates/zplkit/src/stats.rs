//! Small statistics helpers for survey-level hypothesis checks.

/// Two-sided Kolmogorov-Smirnov statistic of a sample against the uniform
/// distribution on [lo, hi]. Samples outside the interval are clamped by
/// the CDF. Returns `None` for an empty sample.
pub fn ks_statistic_uniform(samples: &[f64], lo: f64, hi: f64) -> Option<f64> {
    if samples.is_empty() || !hi.is_finite() || !lo.is_finite() || hi <= lo {
        return None;
    }
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
        let below = i as f64 / n;
        let above = (i as f64 + 1.0) / n;
        d = d.max((cdf - below).abs()).max((above - cdf).abs());
    }
    Some(d)
}

/// Asymptotic two-sided KS p-value with the finite-sample stretch
/// λ = (√n + 0.12 + 0.11/√n)·D.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    if n == 0 || !d.is_finite() || d <= 0.0 {
        return 1.0;
    }
    let sqrt_n = (n as f64).sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += 2.0 * sign * term;
        sign = -sign;
        if term < 1e-18 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}
