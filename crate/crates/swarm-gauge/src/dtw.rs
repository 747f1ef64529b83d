//! Dynamic time warping distance between two discrete curves.
//!
//! The kernel behind the reactivity, adaptability and noise-robustness
//! measures. Plain unweighted step set {(1,0), (0,1), (1,1)}, summed
//! pointwise costs, boundary-anchored paths, no path-length
//! normalization: the metrics compare DTW values across conditions at a
//! fixed curve length, so normalizing would only obscure the summed-cost
//! semantics.
//!
//! Note that DTW does not satisfy the triangle inequality in general, so
//! nothing here (or in the tests) relies on it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DtwError {
    #[error("dtw requires non-empty sequences")]
    EmptySequence,
    #[error("length difference {diff} exceeds Sakoe-Chiba window {window}")]
    WindowTooNarrow { diff: usize, window: usize },
}

/// Pointwise cost between two samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointCost {
    /// `|a - b|`; the default for one-dimensional performance curves.
    #[default]
    AbsoluteDifference,
    /// `(a - b)^2`; penalizes large excursions harder.
    SquaredDifference,
}

impl PointCost {
    fn eval(self, a: f64, b: f64) -> f64 {
        match self {
            PointCost::AbsoluteDifference => (a - b).abs(),
            PointCost::SquaredDifference => (a - b) * (a - b),
        }
    }
}

/// DTW configuration: pointwise cost and optional Sakoe-Chiba band.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DtwConfig {
    pub cost: PointCost,
    /// Band half-width in points; `None` evaluates the full matrix.
    pub window: Option<usize>,
}

/// Minimum cumulative alignment cost between `x` and `y`.
///
/// Zero exactly when an alignment with all-zero pointwise costs exists
/// (in particular whenever `x == y`).
pub fn dtw_distance(x: &[f64], y: &[f64], cfg: &DtwConfig) -> Result<f64, DtwError> {
    if x.is_empty() || y.is_empty() {
        return Err(DtwError::EmptySequence);
    }
    if let Some(window) = cfg.window {
        let diff = x.len().abs_diff(y.len());
        if diff > window {
            return Err(DtwError::WindowTooNarrow { diff, window });
        }
    }

    let n = x.len();
    let m = y.len();
    let mut cost = vec![f64::INFINITY; (n + 1) * (m + 1)];
    let idx = |i: usize, j: usize| i * (m + 1) + j;
    cost[idx(0, 0)] = 0.0;

    for i in 1..=n {
        let (j_lo, j_hi) = match cfg.window {
            Some(w) => (i.saturating_sub(w).max(1), (i + w).min(m)),
            None => (1, m),
        };
        for j in j_lo..=j_hi {
            let c = cfg.cost.eval(x[i - 1], y[j - 1]);
            let best = cost[idx(i - 1, j)].min(cost[idx(i, j - 1)]).min(cost[idx(i - 1, j - 1)]);
            cost[idx(i, j)] = c + best;
        }
    }
    Ok(cost[idx(n, m)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dtw(x: &[f64], y: &[f64]) -> f64 {
        dtw_distance(x, y, &DtwConfig::default()).unwrap()
    }

    #[test]
    fn identical_sequences_have_zero_distance() {
        assert_eq!(dtw(&[3.0, 1.0, 4.0], &[3.0, 1.0, 4.0]), 0.0);
    }

    #[test]
    fn constant_offset_costs_one_per_point() {
        // Brute-force enumeration over all alignment paths of a length-3
        // pair gives 3: every path matches at least 3 unit-cost cells.
        assert_eq!(dtw(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]), 3.0);
    }

    #[test]
    fn duplicated_point_aligns_free() {
        // Brute force: [1,2,3] warps onto [1,2,2,3] at zero cost, the
        // duplicated 2 absorbing the extra step.
        assert_eq!(dtw(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]), 0.0);
    }

    #[test]
    fn empty_sequence_is_an_error() {
        assert_eq!(
            dtw_distance(&[], &[1.0], &DtwConfig::default()),
            Err(DtwError::EmptySequence)
        );
    }

    #[test]
    fn window_narrower_than_length_gap_is_an_error() {
        let cfg = DtwConfig { window: Some(1), ..DtwConfig::default() };
        assert_eq!(
            dtw_distance(&[1.0], &[1.0, 1.0, 1.0], &cfg),
            Err(DtwError::WindowTooNarrow { diff: 2, window: 1 })
        );
    }

    #[test]
    fn full_window_matches_unwindowed() {
        let x = [0.0, 2.0, 1.5, 3.0, 0.5];
        let y = [0.5, 1.0, 2.5, 2.0];
        let star = dtw(&x, &y);
        let cfg = DtwConfig { window: Some(5), ..DtwConfig::default() };
        assert_eq!(dtw_distance(&x, &y, &cfg).unwrap(), star);
    }

    #[test]
    fn squared_cost_is_supported() {
        let cfg = DtwConfig { cost: PointCost::SquaredDifference, ..DtwConfig::default() };
        assert_eq!(dtw_distance(&[0.0], &[3.0], &cfg).unwrap(), 9.0);
    }
}
