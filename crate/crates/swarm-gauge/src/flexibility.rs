//! Flexibility measures: reactivity and adaptability.
//!
//! Environmental conditions are modeled as an ideal signal `I_ec(t)`
//! (here a positive constant, the un-throttled maximum robot speed) plus
//! a signed adverse deviation `V_dev(t)` expressed as a waveform. The
//! two measures compare the measured performance curve against a
//! reference curve with dynamic time warping:
//!
//! * **reactivity** — distance to the ideal *reactive* curve, which
//!   tracks the conditions instantaneously and proportionally;
//! * **adaptability** — distance to the performance curve measured under
//!   ideal conditions, i.e. how invariant performance stays.
//!
//! Zero is optimal for both; lower is better.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curves::{CurveError, PerformanceCurve};
use crate::dtw::{dtw_distance, DtwConfig, DtwError};

#[derive(Debug, Error)]
pub enum FlexibilityError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Dtw(#[from] DtwError),
    #[error("undefined proportionality at t={0}: ideal condition signal is 0")]
    UndefinedProportionality(u64),
    #[error("waveform amplitude must be in [0, 1), got {0}")]
    AmplitudeOutOfRange(f64),
    #[error("waveform period must be >= 2 timesteps, got {0}")]
    PeriodTooShort(u64),
}

/// Waveform shape of the adverse deviation `V_dev(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveformKind {
    /// `V_dev(t) = amplitude` at every t.
    Constant,
    /// Alternates between 0 and `amplitude` every half period, starting
    /// at 0 adversity at t = 0.
    Square,
    /// `amplitude * (1 - cos(2 pi t / period)) / 2`: smooth, non-negative
    /// and 0 at t = 0.
    Sine,
}

/// Which robots a speed throttle applies to.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThrottleTarget {
    /// Only robots carrying an object are slowed.
    #[default]
    CarrySpeed,
    /// Every robot is slowed.
    AllSpeed,
}

/// Ideal-condition baseline plus deviation waveform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceProfile {
    /// Constant ideal condition signal `I_ec(t)`.
    pub ideal: f64,
    pub kind: WaveformKind,
    /// Peak adversity as a throttle fraction, in `[0, 1)`.
    pub amplitude: f64,
    /// Waveform period in timesteps.
    pub period: u64,
    /// Phase offset in timesteps.
    pub phase: f64,
    pub target: ThrottleTarget,
}

impl Default for VarianceProfile {
    fn default() -> Self {
        Self {
            ideal: 1.0,
            kind: WaveformKind::Constant,
            amplitude: 0.0,
            period: 2,
            phase: 0.0,
            target: ThrottleTarget::CarrySpeed,
        }
    }
}

impl VarianceProfile {
    pub fn new(
        kind: WaveformKind,
        amplitude: f64,
        period: u64,
        target: ThrottleTarget,
    ) -> Result<Self, FlexibilityError> {
        if !(0.0..1.0).contains(&amplitude) {
            return Err(FlexibilityError::AmplitudeOutOfRange(amplitude));
        }
        if kind != WaveformKind::Constant && period < 2 {
            return Err(FlexibilityError::PeriodTooShort(period));
        }
        Ok(Self { ideal: 1.0, kind, amplitude, period, phase: 0.0, target })
    }

    /// Deviation `V_dev(t)` at a timestep.
    pub fn deviation_at(&self, t: u64) -> f64 {
        let tau = t as f64 + self.phase;
        match self.kind {
            WaveformKind::Constant => self.amplitude,
            WaveformKind::Square => {
                // High exactly where sin(2 pi tau / period) > 0, i.e. on
                // the open first half of each period; computed from the
                // phase fraction so period boundaries are exact.
                let frac = (tau / self.period as f64).rem_euclid(1.0);
                if frac > 0.0 && frac < 0.5 {
                    self.amplitude
                } else {
                    0.0
                }
            }
            WaveformKind::Sine => {
                let angle = 2.0 * std::f64::consts::PI * tau / self.period as f64;
                self.amplitude * (1.0 - angle.cos()) / 2.0
            }
        }
    }

    /// Ideal condition signal `I_ec(t)` at a timestep.
    pub fn ideal_at(&self, _t: u64) -> f64 {
        self.ideal
    }

    /// Timestep used when sampling the waveform for interval `i` of a
    /// curve: the interval midpoint.
    pub fn interval_sample_step(interval: usize, interval_len: u32) -> u64 {
        interval as u64 * interval_len as u64 + interval_len as u64 / 2
    }
}

/// How the per-interval proportionality factor scales the ideal curve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactivityConvention {
    /// `I_ec / (V_dev + I_ec)`: a speed throttle of x% is expected to
    /// cost x% performance, so worse conditions lower the reference
    /// curve. The default for speed-cap deviations.
    #[default]
    ProportionalSlowdown,
    /// The literal ratio `(V_dev + I_ec) / I_ec`, under which positive
    /// deviations *raise* the reference curve.
    LiteralRatio,
}

/// Everything reactivity and adaptability need.
#[derive(Debug, Clone, Copy)]
pub struct FlexibilityInput<'a> {
    pub perf_ideal: &'a PerformanceCurve,
    pub perf_actual: &'a PerformanceCurve,
    pub profile: &'a VarianceProfile,
    pub dtw_cfg: DtwConfig,
    pub convention: ReactivityConvention,
}

impl<'a> FlexibilityInput<'a> {
    pub fn new(
        perf_ideal: &'a PerformanceCurve,
        perf_actual: &'a PerformanceCurve,
        profile: &'a VarianceProfile,
    ) -> Result<Self, FlexibilityError> {
        perf_ideal.check_shape(perf_actual)?;
        Ok(Self {
            perf_ideal,
            perf_actual,
            profile,
            dtw_cfg: DtwConfig::default(),
            convention: ReactivityConvention::default(),
        })
    }

    pub fn with_dtw(mut self, cfg: DtwConfig) -> Self {
        self.dtw_cfg = cfg;
        self
    }

    pub fn with_convention(mut self, convention: ReactivityConvention) -> Self {
        self.convention = convention;
        self
    }
}

/// Signed proportional difference between actual and ideal conditions,
/// `c_t = (V_dev(t) + I_ec(t)) / I_ec(t)`, from raw signal values.
pub fn proportionality_parts(v_dev: f64, i_ec: f64, t: u64) -> Result<f64, FlexibilityError> {
    if i_ec == 0.0 {
        return Err(FlexibilityError::UndefinedProportionality(t));
    }
    Ok((v_dev + i_ec) / i_ec)
}

/// `c_t` sampled from a profile at a timestep.
pub fn proportionality(profile: &VarianceProfile, t: u64) -> Result<f64, FlexibilityError> {
    proportionality_parts(profile.deviation_at(t), profile.ideal_at(t), t)
}

fn reactive_factor(
    profile: &VarianceProfile,
    t: u64,
    convention: ReactivityConvention,
) -> Result<f64, FlexibilityError> {
    let c = proportionality(profile, t)?;
    Ok(match convention {
        ReactivityConvention::LiteralRatio => c,
        // c is never 0 here: ideal > 0 was checked and amplitude < 1
        // keeps v_dev + i_ec positive for throttle profiles.
        ReactivityConvention::ProportionalSlowdown => 1.0 / c,
    })
}

/// The ideal reactive reference: the ideal curve scaled pointwise by the
/// per-interval proportionality factor.
pub fn ideal_reactivity_curve(
    perf_ideal: &PerformanceCurve,
    profile: &VarianceProfile,
    convention: ReactivityConvention,
) -> Result<PerformanceCurve, FlexibilityError> {
    let mut values = Vec::with_capacity(perf_ideal.len());
    for (i, &p) in perf_ideal.values().iter().enumerate() {
        let t = VarianceProfile::interval_sample_step(i, perf_ideal.interval_len());
        values.push(reactive_factor(profile, t, convention)? * p);
    }
    Ok(PerformanceCurve::new(
        values,
        perf_ideal.interval_len(),
        perf_ideal.swarm_size(),
        perf_ideal.controller_id(),
        format!("{}-reactive-ref", perf_ideal.condition_tag()),
    )?)
}

/// DTW distance from the ideal reactive reference curve; 0 is optimal.
pub fn reactivity(input: &FlexibilityInput<'_>) -> Result<f64, FlexibilityError> {
    let reference = ideal_reactivity_curve(input.perf_ideal, input.profile, input.convention)?;
    Ok(dtw_distance(reference.values(), input.perf_actual.values(), &input.dtw_cfg)?)
}

/// DTW distance from the ideal-conditions performance curve; 0 is optimal.
pub fn adaptability(input: &FlexibilityInput<'_>) -> Result<f64, FlexibilityError> {
    input.perf_ideal.check_shape(input.perf_actual)?;
    Ok(dtw_distance(input.perf_ideal.values(), input.perf_actual.values(), &input.dtw_cfg)?)
}
