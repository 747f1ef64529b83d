//! Karp-Flatt style scalability measure.
//!
//! Treats robots like processors: per interval the serial fraction
//! `e_t = (1/psi_t - 1/r) / (1 - 1/r)` is computed from the throughput
//! speedup `psi_t = P(N2,t)/P(N1,t)` and the size ratio `r = N2/N1`, and
//! the metric sums `1 - e_t` over all intervals. A perfectly cooperative
//! interval (psi = r) contributes 1, no speedup (psi = 1) contributes 0,
//! and degradation (psi < 1) goes negative — expected for swarms, where
//! adding robots can hurt.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curves::{CurveError, PerformanceCurve};

#[derive(Debug, Error)]
pub enum ScalabilityError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("sizes must satisfy N1 < N2, got {n1} and {n2}")]
    SizesNotOrdered { n1: u32, n2: u32 },
    #[error("clamp epsilon must be > 0")]
    NonPositiveEpsilon,
}

/// What to do with intervals where a performance value is zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroPolicy {
    /// Drop the interval from the sum (the default; clamping during
    /// startup intervals manufactures enormous speedups).
    #[default]
    Skip,
    /// Substitute the epsilon for zero values.
    Clamp(f64),
}

/// Which serial-fraction formula to use.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SerialFractionForm {
    /// The original Karp-Flatt serial fraction on the inverse speedup,
    /// `(1/psi - 1/r) / (1 - 1/r)`. Cooperative swarms score high.
    #[default]
    Standard,
    /// Compatibility variant with the raw performance ratio in the
    /// numerator, `(psi - 1/r) / (1 - 1/r)`. Inverts the cooperative
    /// direction (perfect speedup scores the *worst*); provided only for
    /// comparison against results computed that way.
    RawRatio,
}

/// Inputs for [`karp_flatt_scalability`].
#[derive(Debug, Clone, Copy)]
pub struct ScalabilityInput<'a> {
    pub perf_low: &'a PerformanceCurve,
    pub perf_high: &'a PerformanceCurve,
    pub zero_policy: ZeroPolicy,
    pub form: SerialFractionForm,
}

impl<'a> ScalabilityInput<'a> {
    pub fn new(
        perf_low: &'a PerformanceCurve,
        perf_high: &'a PerformanceCurve,
    ) -> Result<Self, ScalabilityError> {
        if perf_low.swarm_size() >= perf_high.swarm_size() {
            return Err(ScalabilityError::SizesNotOrdered {
                n1: perf_low.swarm_size(),
                n2: perf_high.swarm_size(),
            });
        }
        perf_low.check_shape(perf_high)?;
        Ok(Self {
            perf_low,
            perf_high,
            zero_policy: ZeroPolicy::default(),
            form: SerialFractionForm::default(),
        })
    }

    pub fn with_zero_policy(mut self, policy: ZeroPolicy) -> Self {
        self.zero_policy = policy;
        self
    }

    pub fn with_form(mut self, form: SerialFractionForm) -> Self {
        self.form = form;
        self
    }
}

/// Sums `1 - e_t` over all intervals the zero policy keeps.
pub fn karp_flatt_scalability(input: &ScalabilityInput<'_>) -> Result<f64, ScalabilityError> {
    if let ZeroPolicy::Clamp(eps) = input.zero_policy {
        if !eps.is_finite() || eps <= 0.0 {
            return Err(ScalabilityError::NonPositiveEpsilon);
        }
    }
    let r = input.perf_high.swarm_size() as f64 / input.perf_low.swarm_size() as f64;
    let mut total = 0.0;
    for (&p_low, &p_high) in input.perf_low.values().iter().zip(input.perf_high.values()) {
        let (p_low, p_high) = match input.zero_policy {
            ZeroPolicy::Skip => {
                if p_low == 0.0 || p_high == 0.0 {
                    continue;
                }
                (p_low, p_high)
            }
            ZeroPolicy::Clamp(eps) => (p_low.max(eps), p_high.max(eps)),
        };
        let psi = p_high / p_low;
        total += 1.0 - serial_fraction(psi, r, input.form);
    }
    Ok(total)
}

/// Serial fraction for one interval.
pub fn serial_fraction(psi: f64, r: f64, form: SerialFractionForm) -> f64 {
    let numerator = match form {
        SerialFractionForm::Standard => 1.0 / psi - 1.0 / r,
        SerialFractionForm::RawRatio => psi - 1.0 / r,
    };
    numerator / (1.0 - 1.0 / r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn perf(values: Vec<f64>, n: u32) -> PerformanceCurve {
        PerformanceCurve::new(values, 1, n, "crw", "ideal").unwrap()
    }

    #[test]
    fn perfect_speedup_scores_one_per_interval() {
        let low = perf(vec![2.0], 10);
        let high = perf(vec![4.0], 20);
        let input = ScalabilityInput::new(&low, &high).unwrap();
        assert_eq!(karp_flatt_scalability(&input).unwrap(), 1.0);
    }

    #[test]
    fn no_speedup_scores_zero() {
        let low = perf(vec![2.0], 10);
        let high = perf(vec![2.0], 20);
        let input = ScalabilityInput::new(&low, &high).unwrap();
        // e = (1 - 0.5) / 0.5 = 1, contribution 0.
        assert_eq!(karp_flatt_scalability(&input).unwrap(), 0.0);
    }

    #[test]
    fn degradation_goes_negative() {
        let low = perf(vec![2.0], 10);
        let high = perf(vec![1.0], 20);
        let input = ScalabilityInput::new(&low, &high).unwrap();
        // psi = 0.5: e = (2 - 0.5) / 0.5 = 3, contribution -2.
        assert_eq!(karp_flatt_scalability(&input).unwrap(), -2.0);
    }

    #[test]
    fn equal_curves_score_exactly_zero() {
        let low = perf(vec![0.25, 1.5, 3.0, 0.125], 4);
        let high = perf(vec![0.25, 1.5, 3.0, 0.125], 16);
        let input = ScalabilityInput::new(&low, &high).unwrap();
        assert_eq!(karp_flatt_scalability(&input).unwrap(), 0.0);
    }

    #[test]
    fn skip_policy_drops_zero_intervals() {
        let low = perf(vec![0.0, 2.0], 10);
        let high = perf(vec![5.0, 4.0], 20);
        let input = ScalabilityInput::new(&low, &high).unwrap();
        assert_eq!(karp_flatt_scalability(&input).unwrap(), 1.0);
    }

    #[test]
    fn clamp_policy_substitutes_epsilon() {
        let low = perf(vec![0.0], 10);
        let high = perf(vec![1.0], 20);
        let input = ScalabilityInput::new(&low, &high)
            .unwrap()
            .with_zero_policy(ZeroPolicy::Clamp(1.0));
        // Clamped to psi = 1: contribution 0.
        assert_eq!(karp_flatt_scalability(&input).unwrap(), 0.0);
        let bad = input.with_zero_policy(ZeroPolicy::Clamp(0.0));
        assert!(karp_flatt_scalability(&bad).is_err());
    }

    #[test]
    fn metric_increases_with_high_performance() {
        let low = perf(vec![2.0], 10);
        let mut last = f64::NEG_INFINITY;
        for p_high in [0.5, 1.0, 2.0, 3.0, 4.0, 8.0] {
            let high = perf(vec![p_high], 20);
            let input = ScalabilityInput::new(&low, &high).unwrap();
            let value = karp_flatt_scalability(&input).unwrap();
            assert!(value > last, "not increasing at psi = {}", p_high / 2.0);
            last = value;
        }
    }

    #[test]
    fn serial_fraction_limit_in_r_is_inverse_speedup() {
        let psi = 2.5;
        let e = serial_fraction(psi, 1e9, SerialFractionForm::Standard);
        assert!((e - 1.0 / psi).abs() < 1e-8);
    }

    #[test]
    fn raw_ratio_form_inverts_direction() {
        // Under the compatibility form, perfect speedup scores worse than
        // no speedup: e = (r - 1/r)/(1 - 1/r) = r + 1 at psi = r.
        let e_perfect = serial_fraction(2.0, 2.0, SerialFractionForm::RawRatio);
        assert_eq!(e_perfect, 3.0);
        let e_flat = serial_fraction(1.0, 2.0, SerialFractionForm::RawRatio);
        assert_eq!(e_flat, 1.0);
        assert!(1.0 - e_perfect < 1.0 - e_flat);
    }

    #[test]
    fn rejects_unordered_sizes() {
        let a = perf(vec![1.0], 10);
        let b = perf(vec![1.0], 10);
        assert!(matches!(
            ScalabilityInput::new(&a, &b),
            Err(ScalabilityError::SizesNotOrdered { .. })
        ));
    }
}
