//! Small order-stable reductions.

/// Pairwise (cascade) summation; the result depends only on the order of
/// `values`, never on how work was scheduled.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(values) / values.len() as f64
}

/// Standard error of the mean, `sd / sqrt(n)` with the unbiased variance.
pub fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    (pairwise_sum(&dev) / (n as f64 - 1.0) / n as f64).sqrt()
}

/// Cumulative trapezoid integral of `values` over `times`, starting at 0.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for j in 0..values.len() {
        if j > 0 {
            acc += 0.5 * (times[j] - times[j - 1]) * (values[j] + values[j - 1]);
        }
        out.push(acc);
    }
    out
}

pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    cumulative_trapezoid(times, values).last().copied().unwrap_or(0.0)
}
