//! Robustness measures: sensor/actuator noise, population dynamics, and
//! swarm availability.
//!
//! Population dynamics are modeled with three Poisson queues — periodic
//! addition of robots (rate `mu_b`), permanent removal (`lambda_d`) and
//! temporary removal with return (`lambda_bd`, `mu_bd`) — combined into
//! a single M/M/1 queue of not-tasked robots. From its rates follow the
//! utilization `rho`, the steady-state waiting count `L`, the expected
//! time a robot spends not tasked, and the availability `p_v` of the
//! finite-capacity chain.
//!
//! [`montecarlo`] simulates the queue processes directly; the closed
//! forms here are validated against those simulations and against
//! [`stationary_occupancy`], an exact linear-algebra solve of the finite
//! chain, which is the authoritative definition of the availability
//! semantics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curves::{CurveError, PerformanceCurve};
use crate::dtw::{dtw_distance, DtwConfig, DtwError};

#[derive(Debug, Error)]
pub enum RobustnessError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Dtw(#[from] DtwError),
    #[error("rates must be finite and >= 0")]
    InvalidRates,
    #[error("service rates sum to zero")]
    ZeroServiceRate,
    #[error("unstable queue: utilization {0} >= 1")]
    UnstableQueue(f64),
    #[error("utilization must lie in (0, 1), got {0}")]
    RhoOutOfRange(f64),
    #[error("N_min must satisfy 1 <= N_min <= N, got N_min={n_min}, N={n}")]
    BadMinimum { n_min: u32, n: u32 },
    #[error("expected not-tasked time {t_not_tasked} exceeds the run length {total}")]
    NotTaskedExceedsRun { t_not_tasked: f64, total: f64 },
}

/// Per-timestep event rates of the three population queues.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QueueRates {
    /// Permanent removal (critical failure or permanent reallocation).
    pub lambda_d: f64,
    /// Temporary removal (repairable failure or temporary reallocation).
    pub lambda_bd: f64,
    /// Addition of reserve robots released from other tasks.
    pub mu_b: f64,
    /// Repair / return of temporarily removed robots.
    pub mu_bd: f64,
}

impl QueueRates {
    pub fn validate(&self) -> Result<(), RobustnessError> {
        let all = [self.lambda_d, self.lambda_bd, self.mu_b, self.mu_bd];
        if all.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(RobustnessError::InvalidRates);
        }
        Ok(())
    }

    pub fn departure_rate(&self) -> f64 {
        self.lambda_d + self.lambda_bd
    }

    pub fn service_rate(&self) -> f64 {
        self.mu_b + self.mu_bd
    }

    pub fn is_zero(&self) -> bool {
        self.departure_rate() == 0.0 && self.service_rate() == 0.0
    }
}

/// Queue utilization `rho = (lambda_d + lambda_bd) / (mu_b + mu_bd)`.
///
/// Must be below 1 for a stable swarm; exactly 1 is returned (flagged
/// unstable by the downstream operations that need stability).
pub fn utilization(rates: &QueueRates) -> Result<f64, RobustnessError> {
    rates.validate()?;
    if rates.service_rate() == 0.0 {
        return Err(RobustnessError::ZeroServiceRate);
    }
    Ok(rates.departure_rate() / rates.service_rate())
}

/// Steady-state waiting count of the not-tasked queue, `rho^2 / (1 - rho)`
/// by Little's law.
pub fn queue_length(rho: f64) -> Result<f64, RobustnessError> {
    if !(0.0..1.0).contains(&rho) {
        return Err(RobustnessError::UnstableQueue(rho));
    }
    Ok(rho * rho / (1.0 - rho))
}

/// Expected total time a robot spends not tasked:
/// `1 / (mu - lambda) + 1 / mu` with the summed rates.
///
/// The first term is the sojourn through the combined removal queue, the
/// second the re-entry delay back into the tasked set.
pub fn time_not_tasked(rates: &QueueRates) -> Result<f64, RobustnessError> {
    rates.validate()?;
    let lambda = rates.departure_rate();
    let mu = rates.service_rate();
    if mu <= lambda {
        return Err(RobustnessError::UnstableQueue(if mu == 0.0 {
            f64::INFINITY
        } else {
            lambda / mu
        }));
    }
    Ok(1.0 / (mu - lambda) + 1.0 / mu)
}

/// Expected time tasked out of a run of `total_time` steps.
///
/// Zero-rate dynamics mean the whole run is tasked.
pub fn tasked_time(total_time: f64, rates: &QueueRates) -> Result<f64, RobustnessError> {
    rates.validate()?;
    if rates.is_zero() {
        return Ok(total_time);
    }
    let not_tasked = time_not_tasked(rates)?;
    if not_tasked >= total_time {
        return Err(RobustnessError::NotTaskedExceedsRun {
            t_not_tasked: not_tasked,
            total: total_time,
        });
    }
    Ok(total_time - not_tasked)
}

/// DTW distance from the noise-free performance curve; 0 is optimal.
pub fn sa_robustness(
    perf_ideal: &PerformanceCurve,
    perf_actual: &PerformanceCurve,
    dtw_cfg: &DtwConfig,
) -> Result<f64, RobustnessError> {
    perf_ideal.check_shape(perf_actual)?;
    Ok(dtw_distance(perf_ideal.values(), perf_actual.values(), dtw_cfg)?)
}

/// Inputs for [`pd_robustness`].
#[derive(Debug, Clone, Copy)]
pub struct RobustnessInput<'a> {
    pub perf_ideal: &'a PerformanceCurve,
    pub perf_actual: &'a PerformanceCurve,
    /// Rates the actual run was subjected to.
    pub rates: QueueRates,
    /// Rates of the reference run (all zero for a static population).
    pub rates_ideal: QueueRates,
    /// Run length in timesteps.
    pub total_time: f64,
}

/// Population-dynamics robustness:
/// `sum_t [P(t) - (T_S / T_S_ideal) * P_ideal(t)]`.
///
/// The weight discounts the ideal curve by how much less of the run a
/// robot is expected to be tasked under the actual dynamics; higher is
/// better, 0 when dynamics leave performance exactly at the weighted
/// ideal.
pub fn pd_robustness(input: &RobustnessInput<'_>) -> Result<f64, RobustnessError> {
    input.perf_ideal.check_shape(input.perf_actual)?;
    let tasked = tasked_time(input.total_time, &input.rates)?;
    let tasked_ideal = tasked_time(input.total_time, &input.rates_ideal)?;
    let weight = tasked / tasked_ideal;
    Ok(input
        .perf_actual
        .values()
        .iter()
        .zip(input.perf_ideal.values())
        .map(|(&p, &p_ideal)| p - weight * p_ideal)
        .sum())
}

/// Stationary distribution of the finite not-tasked chain with `N + 1`
/// states and geometric ratio `rho`, by brute-force linear solve.
///
/// State `k` holds probability `pi_k`; the balance equations
/// `pi_k * lambda = pi_(k+1) * mu` are assembled into a tridiagonal
/// system and eliminated directly, with no appeal to the closed form.
/// This is the authoritative oracle [`availability`] is validated
/// against.
pub fn stationary_occupancy(rho: f64, n: u32) -> Result<Vec<f64>, RobustnessError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(RobustnessError::RhoOutOfRange(rho));
    }
    let states = n as usize + 1;
    // Fix lambda = rho, mu = 1 (only the ratio matters) and solve the
    // global balance equations by forward elimination: the cut between
    // states k and k+1 gives pi_(k+1) = pi_k * lambda / mu.
    let (lambda, mu) = (rho, 1.0);
    let mut pi = vec![0.0; states];
    pi[0] = 1.0;
    for k in 1..states {
        pi[k] = pi[k - 1] * lambda / mu;
    }
    let total: f64 = pi.iter().sum();
    for p in pi.iter_mut() {
        *p /= total;
    }
    Ok(pi)
}

/// Probability that the end state of the chain holds all `N` robots:
/// `pi_N = rho^N (1 - rho) / (1 - rho^(N+1))`.
pub fn occupancy_tail_probability(rho: f64, n: u32) -> Result<f64, RobustnessError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(RobustnessError::RhoOutOfRange(rho));
    }
    Ok(rho.powi(n as i32) * (1.0 - rho) / (1.0 - rho.powi(n as i32 + 1)))
}

/// Swarm availability: steady-state probability that the queue of robots
/// allocated to the task holds at least `N_min` of the `N` robots.
///
/// Closed form `p_v = pi_N * (1 + sum_(k=N_min)^(N-1) prod_(i=k+1)^N 1/rho)`
/// with `pi_N` from [`occupancy_tail_probability`]; equivalently the tail
/// sum `sum_(k=N_min)^N pi_k` of [`stationary_occupancy`]. Clamped to
/// `[0, 1]` against floating-point drift.
pub fn availability(rho: f64, n: u32, n_min: u32) -> Result<f64, RobustnessError> {
    if n_min < 1 || n_min > n {
        return Err(RobustnessError::BadMinimum { n_min, n });
    }
    let pi_n = occupancy_tail_probability(rho, n)?;
    let mut series = 1.0; // the k = N term
    let mut product = 1.0;
    for _k in (n_min..n).rev() {
        product /= rho;
        series += product;
    }
    Ok((pi_n * series).clamp(0.0, 1.0))
}

pub mod montecarlo {
    //! Monte-Carlo validators for the queueing closed forms.
    //!
    //! Each simulator owns its private RNG stream seeded explicitly, so
    //! results are reproducible and independent of anything else.

    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::{QueueRates, RobustnessError};

    /// Observed statistics of the combined not-tasked queue process.
    #[derive(Debug, Clone, Copy)]
    pub struct QueueSimStats {
        /// Mean number of robots waiting (excluding the one in service).
        pub mean_waiting: f64,
        /// Mean time from leaving the tasked set to rejoining it, over
        /// completed absences.
        pub mean_time_not_tasked: f64,
        /// Completed absences the mean is over.
        pub completed: u64,
    }

    /// Simulates the combined removal/return process for `steps`
    /// timesteps: departures arrive at the summed removal rate, a single
    /// server processes them at the summed service rate, and each
    /// processed robot independently waits out a re-entry delay at the
    /// same service rate before counting as tasked again.
    pub fn simulate_queue_process(
        rates: &QueueRates,
        steps: u64,
        seed: u64,
    ) -> Result<QueueSimStats, RobustnessError> {
        rates.validate()?;
        let lambda = rates.departure_rate();
        let mu = rates.service_rate();
        if mu <= lambda {
            return Err(RobustnessError::UnstableQueue(if mu == 0.0 {
                f64::INFINITY
            } else {
                lambda / mu
            }));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Arrival steps of robots waiting in or being served by the queue.
        let mut queue: std::collections::VecDeque<u64> = std::collections::VecDeque::new();
        // Robots past the server, still waiting to re-enter the tasked set.
        let mut rejoining: Vec<u64> = Vec::new();
        let mut waiting_acc: u128 = 0;
        let mut total_absence: u128 = 0;
        let mut completed: u64 = 0;

        for t in 0..steps {
            // At most one queue event per step keeps the embedded chain's
            // stationary distribution exactly geometric in lambda/mu.
            let u: f64 = rng.random();
            if u < lambda {
                queue.push_back(t);
            } else if u < lambda + mu {
                if let Some(arrived) = queue.pop_front() {
                    rejoining.push(arrived);
                }
            }
            // Re-entry delays are independent per robot.
            let mut i = 0;
            while i < rejoining.len() {
                if rng.random::<f64>() < mu {
                    let arrived = rejoining.swap_remove(i);
                    total_absence += (t - arrived) as u128;
                    completed += 1;
                } else {
                    i += 1;
                }
            }
            waiting_acc += queue.len().saturating_sub(1) as u128;
        }

        Ok(QueueSimStats {
            mean_waiting: waiting_acc as f64 / steps as f64,
            mean_time_not_tasked: if completed == 0 {
                f64::NAN
            } else {
                total_absence as f64 / completed as f64
            },
            completed,
        })
    }

    /// Simulates the finite-capacity chain (`N + 1` states, up-rate
    /// `lambda`, down-rate `mu`) and reports the fraction of time at
    /// least `n_min` robots were in the tasked queue.
    pub fn simulate_availability(
        rho: f64,
        n: u32,
        n_min: u32,
        steps: u64,
        seed: u64,
    ) -> Result<f64, RobustnessError> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(RobustnessError::RhoOutOfRange(rho));
        }
        if n_min < 1 || n_min > n {
            return Err(RobustnessError::BadMinimum { n_min, n });
        }
        // Scale so at most one event fires per step; only the ratio of
        // the rates matters for the stationary distribution.
        let lambda = 0.4 * rho;
        let mu = 0.4;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state: u32 = 0;
        let mut hits: u64 = 0;
        for _ in 0..steps {
            let u: f64 = rng.random();
            if u < lambda {
                if state < n {
                    state += 1;
                }
            } else if u < lambda + mu && state > 0 {
                state -= 1;
            }
            if state >= n_min {
                hits += 1;
            }
        }
        Ok(hits as f64 / steps as f64)
    }
}
