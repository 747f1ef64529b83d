//! Emergent self-organization measures.
//!
//! Both measures compare swarms of two sizes `N1 < N2`:
//!
//! * spatial self-organization: sub-linear growth of performance *lost*
//!   to inter-robot interference, computed from per-interval loss curves;
//! * task-based self-organization: super-linear marginal performance
//!   gain.
//!
//! Positive values indicate self-organization; exactly linear scaling
//! yields zero.

use thiserror::Error;

use crate::curves::{CurveError, InterferenceCurve, PerformanceCurve};

#[derive(Debug, Error)]
pub enum SelfOrgError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("swarm of size {0} needs a single-robot baseline for the loss curve")]
    MissingBaseline(u32),
    #[error("baseline curves must have swarm size 1, got {0}")]
    BaselineNotSingle(u32),
    #[error("sizes must satisfy N1 < N2, got {n1} and {n2}")]
    SizesNotOrdered { n1: u32, n2: u32 },
    #[error("performance and interference curves must pair up: {0}")]
    PairMismatch(String),
}

/// One swarm's measured curves: performance plus interference.
#[derive(Debug, Clone, Copy)]
pub struct MeasuredPair<'a> {
    pub perf: &'a PerformanceCurve,
    pub interference: &'a InterferenceCurve,
}

impl<'a> MeasuredPair<'a> {
    pub fn new(
        perf: &'a PerformanceCurve,
        interference: &'a InterferenceCurve,
    ) -> Result<Self, SelfOrgError> {
        if perf.len() != interference.len()
            || perf.interval_len() != interference.interval_len()
            || perf.swarm_size() != interference.swarm_size()
        {
            return Err(SelfOrgError::PairMismatch(format!(
                "perf N={} ({} pts @ {}), interference N={} ({} pts @ {})",
                perf.swarm_size(),
                perf.len(),
                perf.interval_len(),
                interference.swarm_size(),
                interference.len(),
                interference.interval_len(),
            )));
        }
        Ok(Self { perf, interference })
    }

    fn swarm_size(&self) -> u32 {
        self.perf.swarm_size()
    }
}

/// Inputs for the spatial measure: a single-robot baseline plus the two
/// swarm sizes under comparison.
#[derive(Debug, Clone, Copy)]
pub struct SelfOrgInput<'a> {
    baseline: MeasuredPair<'a>,
    low: MeasuredPair<'a>,
    high: MeasuredPair<'a>,
}

impl<'a> SelfOrgInput<'a> {
    pub fn new(
        baseline: MeasuredPair<'a>,
        low: MeasuredPair<'a>,
        high: MeasuredPair<'a>,
    ) -> Result<Self, SelfOrgError> {
        if baseline.swarm_size() != 1 {
            return Err(SelfOrgError::BaselineNotSingle(baseline.swarm_size()));
        }
        if low.swarm_size() >= high.swarm_size() {
            return Err(SelfOrgError::SizesNotOrdered {
                n1: low.swarm_size(),
                n2: high.swarm_size(),
            });
        }
        baseline.perf.check_shape(low.perf)?;
        baseline.perf.check_shape(high.perf)?;
        Ok(Self { baseline, low, high })
    }
}

/// Per-interval performance lost to inter-robot interference.
///
/// For a single robot the loss is `P(1,t) * T_lost(1,t)`. For `N > 1`
/// the interference `N` independent robots would have suffered is
/// subtracted: `P(N,t) * T_lost(N,t) - N * P_lost(1,t)`, so values can
/// go negative when the swarm interferes less than `N` loners would.
pub fn perf_lost(
    pair: MeasuredPair<'_>,
    baseline: Option<MeasuredPair<'_>>,
) -> Result<Vec<f64>, SelfOrgError> {
    let n = pair.swarm_size();
    let own: Vec<f64> = pair
        .perf
        .values()
        .iter()
        .zip(pair.interference.values())
        .map(|(&p, &f)| p * f)
        .collect();
    if n == 1 {
        return Ok(own);
    }
    let base = baseline.ok_or(SelfOrgError::MissingBaseline(n))?;
    if base.swarm_size() != 1 {
        return Err(SelfOrgError::BaselineNotSingle(base.swarm_size()));
    }
    pair.perf.check_shape(base.perf)?;
    let base_lost = perf_lost(base, None)?;
    Ok(own
        .iter()
        .zip(&base_lost)
        .map(|(&lost_n, &lost_1)| lost_n - n as f64 * lost_1)
        .collect())
}

/// Spatial self-organization from precomputed loss sequences.
///
/// `sum_t [(N2/N1) * lost_low(t) - lost_high(t)]`; positive means
/// interference grew sub-linearly with swarm size.
pub fn spatial_from_losses(
    lost_low: &[f64],
    lost_high: &[f64],
    n1: u32,
    n2: u32,
) -> Result<f64, SelfOrgError> {
    if n1 >= n2 {
        return Err(SelfOrgError::SizesNotOrdered { n1, n2 });
    }
    if lost_low.len() != lost_high.len() {
        return Err(SelfOrgError::Curve(CurveError::ShapeMismatch(format!(
            "{} vs {} loss points",
            lost_low.len(),
            lost_high.len()
        ))));
    }
    let ratio = n2 as f64 / n1 as f64;
    Ok(lost_low
        .iter()
        .zip(lost_high)
        .map(|(&lo, &hi)| ratio * lo - hi)
        .sum())
}

/// Spatial self-organization between the input's two swarm sizes.
pub fn spatial_selforg(input: &SelfOrgInput<'_>) -> Result<f64, SelfOrgError> {
    let lost_low = perf_lost(input.low, Some(input.baseline))?;
    let lost_high = perf_lost(input.high, Some(input.baseline))?;
    spatial_from_losses(
        &lost_low,
        &lost_high,
        input.low.swarm_size(),
        input.high.swarm_size(),
    )
}

/// Task-based self-organization: `sum_t [P(N2,t) - (N2/N1) * P(N1,t)]`.
///
/// Positive means the marginal performance gain from growing the swarm
/// was super-linear.
pub fn task_selforg(
    perf_low: &PerformanceCurve,
    perf_high: &PerformanceCurve,
) -> Result<f64, SelfOrgError> {
    let (n1, n2) = (perf_low.swarm_size(), perf_high.swarm_size());
    if n1 >= n2 {
        return Err(SelfOrgError::SizesNotOrdered { n1, n2 });
    }
    perf_low.check_shape(perf_high)?;
    let ratio = n2 as f64 / n1 as f64;
    Ok(perf_low
        .values()
        .iter()
        .zip(perf_high.values())
        .map(|(&lo, &hi)| hi - ratio * lo)
        .sum())
}
