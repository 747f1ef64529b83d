//! Sample statistics for run averaging.

/// z value for a two-sided 95% interval under the normal approximation.
pub const Z_95: f64 = 1.96;

/// Mean and 95% confidence half-width of a sample.
///
/// Half-width is `1.96 * s / sqrt(n)` with `s` the n-1 sample standard
/// deviation. Panics on empty input; a single observation has zero
/// half-width by convention.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty(), "mean_ci on empty sample");
    // Constant samples short-circuit so the mean is exact and the width
    // exactly zero, not within an ulp of them.
    if values.iter().all(|v| v.to_bits() == values[0].to_bits()) {
        return (values[0], 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Z_95 * var.sqrt() / n.sqrt())
}
