//! Perturbation injection: speed throttling, Gaussian sensor/actuator
//! noise, and Poisson population dynamics.
//!
//! Each family draws from its own named RNG stream, so toggling one
//! perturbation never shifts the draws of another; a run with sigma = 0
//! noise or all-zero population rates is byte-identical to the
//! unperturbed run under the same seed.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::flexibility::VarianceProfile;
use crate::robustness::QueueRates;
use crate::util::{wrap_angle, Vec2};

/// Sensor / actuator channels noise can be injected into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseChannel {
    PositionSense,
    BearingSense,
    BlockDetect,
    SpeedActuation,
    TurnActuation,
}

pub const ALL_CHANNELS: [NoiseChannel; 5] = [
    NoiseChannel::PositionSense,
    NoiseChannel::BearingSense,
    NoiseChannel::BlockDetect,
    NoiseChannel::SpeedActuation,
    NoiseChannel::TurnActuation,
];

/// Zero-mean Gaussian noise, sigma expressed as a fraction of each
/// channel's full scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseProfile {
    pub sigma: f64,
    pub channels: Vec<NoiseChannel>,
}

impl NoiseProfile {
    /// Noise on every channel.
    pub fn all(sigma: f64) -> Self {
        Self { sigma, channels: ALL_CHANNELS.to_vec() }
    }

    pub fn enabled(&self, channel: NoiseChannel) -> bool {
        self.sigma > 0.0 && self.channels.contains(&channel)
    }
}

/// Full-scale magnitudes per channel, fixed by the world geometry:
/// position = arena diagonal, bearing = pi, speed and turn = configured
/// maxima, block detection = sense radius.
#[derive(Debug, Clone, Copy)]
pub struct FullScales {
    pub position: f64,
    pub bearing: f64,
    pub speed: f64,
    pub turn: f64,
    pub block_detect: f64,
}

/// Applies sensor/actuator noise for one run.
#[derive(Debug, Clone)]
pub struct NoiseInjector {
    profile: NoiseProfile,
    scales: FullScales,
    arena: (f64, f64),
}

impl NoiseInjector {
    pub fn new(profile: NoiseProfile, scales: FullScales, arena: (f64, f64)) -> Self {
        Self { profile, scales, arena }
    }

    fn draw(&self, full_scale: f64, rng: &mut impl Rng) -> f64 {
        // sigma is validated >= 0; the unwrap cannot fire.
        let normal = Normal::new(0.0, self.profile.sigma * full_scale).unwrap();
        normal.sample(rng)
    }

    /// Perceived own position: true position plus noise, clamped to the
    /// arena.
    pub fn sense_position(&self, p: Vec2, rng: &mut impl Rng) -> Vec2 {
        if !self.profile.enabled(NoiseChannel::PositionSense) {
            return p;
        }
        let x = (p.x + self.draw(self.scales.position, rng)).clamp(0.0, self.arena.0);
        let y = (p.y + self.draw(self.scales.position, rng)).clamp(0.0, self.arena.1);
        Vec2::new(x, y)
    }

    /// Perceived bearing, wrapped into (-pi, pi].
    pub fn sense_bearing(&self, theta: f64, rng: &mut impl Rng) -> f64 {
        if !self.profile.enabled(NoiseChannel::BearingSense) {
            return theta;
        }
        wrap_angle(theta + self.draw(self.scales.bearing, rng))
    }

    /// Perceived position of a detected block, clamped to the arena.
    pub fn sense_block(&self, p: Vec2, rng: &mut impl Rng) -> Vec2 {
        if !self.profile.enabled(NoiseChannel::BlockDetect) {
            return p;
        }
        let x = (p.x + self.draw(self.scales.block_detect, rng)).clamp(0.0, self.arena.0);
        let y = (p.y + self.draw(self.scales.block_detect, rng)).clamp(0.0, self.arena.1);
        Vec2::new(x, y)
    }

    /// Actuated speed: commanded speed plus noise, clamped to [0, cap].
    pub fn act_speed(&self, speed: f64, cap: f64, rng: &mut impl Rng) -> f64 {
        let speed = if self.profile.enabled(NoiseChannel::SpeedActuation) {
            speed + self.draw(self.scales.speed, rng)
        } else {
            speed
        };
        speed.clamp(0.0, cap)
    }

    /// Actuated turn: commanded turn plus noise, clamped to the per-step
    /// turn limit.
    pub fn act_turn(&self, turn: f64, max_turn: f64, rng: &mut impl Rng) -> f64 {
        let turn = if self.profile.enabled(NoiseChannel::TurnActuation) {
            turn + self.draw(self.scales.turn, rng)
        } else {
            turn
        };
        turn.clamp(-max_turn, max_turn)
    }
}

/// Multiplicative speed cap for the current step: `1 - V_dev(t)`.
///
/// Applies to carrying robots only when the profile targets the carry
/// speed, to everyone otherwise. The amplitude invariant keeps the
/// factor in (0, 1].
pub fn throttle_factor(profile: &VarianceProfile, t: u64) -> f64 {
    1.0 - profile.deviation_at(t)
}

/// Poisson population dynamics configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationProfile {
    pub rates: QueueRates,
    /// Total robots that can ever exist (must equal the world's robot
    /// count).
    pub max_population: u32,
    /// Robots tasked at t = 0; the rest wait in reserve.
    pub initial_tasked: u32,
}

impl PopulationProfile {
    pub fn new(rates: QueueRates, max_population: u32, initial_tasked: u32) -> Self {
        Self { rates, max_population, initial_tasked }
    }

    pub fn is_inert(&self) -> bool {
        self.rates.is_zero() && self.initial_tasked == self.max_population
    }
}

/// One robot's population event in a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PopulationEvent {
    RemovePermanent,
    RemoveTemporary,
    Return,
    Join,
}

/// Current population standing of a robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobotStanding {
    Active,
    Reserve,
    AbsentTemporary,
    Dead,
}

/// Draws this step's population events, one per robot at most.
///
/// Active robots depart permanently with probability `lambda_d`, else
/// temporarily with `lambda_bd`; absent robots return with `mu_bd`;
/// reserve robots join with `mu_b`. Rates are per-step Bernoulli
/// probabilities, a faithful Poisson realization for rates well below
/// 1% per step. Zero rates draw nothing at all, preserving
/// byte-identity with unperturbed runs.
pub fn population_events(
    rates: &QueueRates,
    standings: &[RobotStanding],
    rng: &mut impl Rng,
) -> Vec<(usize, PopulationEvent)> {
    let mut events = Vec::new();
    for (index, standing) in standings.iter().enumerate() {
        match standing {
            RobotStanding::Active => {
                if rates.lambda_d > 0.0 && rng.random::<f64>() < rates.lambda_d {
                    events.push((index, PopulationEvent::RemovePermanent));
                    continue;
                }
                if rates.lambda_bd > 0.0 && rng.random::<f64>() < rates.lambda_bd {
                    events.push((index, PopulationEvent::RemoveTemporary));
                }
            }
            RobotStanding::AbsentTemporary => {
                if rates.mu_bd > 0.0 && rng.random::<f64>() < rates.mu_bd {
                    events.push((index, PopulationEvent::Return));
                }
            }
            RobotStanding::Reserve => {
                if rates.mu_b > 0.0 && rng.random::<f64>() < rates.mu_b {
                    events.push((index, PopulationEvent::Join));
                }
            }
            RobotStanding::Dead => {}
        }
    }
    events
}
