//! Deterministic discrete-time 2D foraging simulator.
//!
//! Robots forage blocks in a rectangular arena and carry them to a nest.
//! Space is continuous, kinematics are unicycle-style (heading plus
//! capped speed per step), and there is no physics engine: the point of
//! the simulator is the performance, interference and population curves
//! a run traces out, not contact dynamics.
//!
//! A run is single-threaded and fully determined by its configuration
//! and seed; one master seed is split into named streams (placement,
//! controllers, noise, population, block motion) so toggling one
//! perturbation never shifts another's draws. Distinct runs are
//! independent and parallelize freely.

pub mod controller;
pub mod perturb;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curves::{
    aggregate_events, CurveBundle, CurveError, InterferenceCurve, PopulationCurve,
};
use crate::flexibility::{ThrottleTarget, VarianceProfile};
use crate::util::{mix_u64, wrap_angle, Vec2};
use controller::{Action, Controller, ControllerMemory, Sensed};
use perturb::{
    population_events, throttle_factor, FullScales, NoiseInjector, NoiseProfile, PopulationEvent,
    PopulationProfile, RobotStanding,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid world config: {0}")]
    InvalidConfig(String),
    #[error("infeasible placement: {0}")]
    PlacementInfeasible(String),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// Axis-aligned rectangle, used for the nest and block cluster regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.x && p.x <= self.x + self.w && p.y >= self.y && p.y <= self.y + self.h
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    fn scaled(&self, factor: f64) -> Rect {
        Rect { x: self.x * factor, y: self.y * factor, w: self.w * factor, h: self.h * factor }
    }

    /// Point on the boundary at perimeter fraction `u` in [0, 1).
    fn perimeter_point(&self, u: f64) -> Vec2 {
        let per = 2.0 * (self.w + self.h);
        let mut d = u.clamp(0.0, 1.0 - 1e-12) * per;
        if d < self.w {
            return Vec2::new(self.x + d, self.y);
        }
        d -= self.w;
        if d < self.h {
            return Vec2::new(self.x + self.w, self.y + d);
        }
        d -= self.h;
        if d < self.w {
            return Vec2::new(self.x + self.w - d, self.y + self.h);
        }
        d -= self.w;
        Vec2::new(self.x, self.y + self.h - d)
    }

    /// Nearest point just outside the rectangle, for releasing a block
    /// dropped inside the nest.
    fn push_out(&self, p: Vec2) -> Vec2 {
        if !self.contains(p) {
            return p;
        }
        let eps = 1e-6;
        let candidates = [
            (p.x - self.x, Vec2::new(self.x - eps, p.y)),
            (self.x + self.w - p.x, Vec2::new(self.x + self.w + eps, p.y)),
            (p.y - self.y, Vec2::new(p.x, self.y - eps)),
            (self.y + self.h - p.y, Vec2::new(p.x, self.y + self.h + eps)),
        ];
        candidates
            .iter()
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|&(_, out)| out)
            .unwrap()
    }
}

/// Whether the arena is fixed (variable swarm density) or scaled so the
/// robot density stays constant as the swarm grows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMode {
    Variable,
    /// Robots per square meter; arena area becomes `n_robots / density`,
    /// keeping the configured aspect ratio, and the nest scales with it.
    Constant(f64),
}

/// How blocks are laid out at initialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockDistribution {
    /// One compact cluster on the far side of the arena from the nest.
    SingleSource,
    /// Uniform over the arena outside the nest.
    Random,
    /// Clusters with sizes drawn from a discrete power law.
    PowerLaw { clusters: u32, exponent: f64 },
}

/// What counts as a performance event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerfEvent {
    /// A block deposited in the nest (transport scenarios).
    Collection,
    /// A block picked up for the first time ever (discovery scenarios,
    /// e.g. search-and-rescue style tasks).
    FirstPickup,
}

/// Full world configuration; every calibration knob lives here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub arena_w: f64,
    pub arena_h: f64,
    pub density_mode: DensityMode,
    pub nest: Rect,
    pub n_robots: u32,
    pub distribution: BlockDistribution,
    pub n_blocks: u32,
    /// Replace collected blocks immediately (stationary transport
    /// throughput) or let them run out (finite discovery targets).
    /// Discovery scenarios measuring first pickups usually want this
    /// off.
    pub block_respawn: bool,
    /// Per-step probability that a free block random-walks one step.
    pub p_rw: f64,
    /// Run length in timesteps.
    pub duration: u64,
    pub seed: u64,
    pub interval_len: u32,
    pub perf_event: PerfEvent,
    // Calibration knobs.
    pub max_speed: f64,
    pub max_turn: f64,
    pub interference_radius: f64,
    pub avoid_duration: u32,
    pub pickup_radius: f64,
    pub block_step: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            arena_w: 16.0,
            arena_h: 16.0,
            density_mode: DensityMode::Variable,
            nest: Rect { x: 7.0, y: 7.0, w: 2.0, h: 2.0 },
            n_robots: 16,
            distribution: BlockDistribution::Random,
            n_blocks: 32,
            block_respawn: true,
            p_rw: 0.0,
            duration: 20_000,
            seed: 1,
            interval_len: crate::curves::DEFAULT_INTERVAL_LEN,
            perf_event: PerfEvent::Collection,
            max_speed: 0.1,
            max_turn: std::f64::consts::FRAC_PI_2,
            interference_radius: 0.3,
            avoid_duration: 10,
            pickup_radius: 0.15,
            block_step: 0.1,
        }
    }
}

impl WorldConfig {
    /// Applies constant-density scaling and checks invariants; returns
    /// the effective config a world will actually run.
    pub fn resolved(&self) -> Result<WorldConfig, SimError> {
        let mut cfg = self.clone();
        if let DensityMode::Constant(density) = cfg.density_mode {
            if !density.is_finite() || density <= 0.0 {
                return Err(SimError::InvalidConfig(format!(
                    "constant density must be > 0, got {density}"
                )));
            }
            if cfg.n_robots == 0 {
                return Err(SimError::InvalidConfig(
                    "constant density needs at least one robot".into(),
                ));
            }
            let target_area = cfg.n_robots as f64 / density;
            let factor = (target_area / (cfg.arena_w * cfg.arena_h)).sqrt();
            cfg.arena_w *= factor;
            cfg.arena_h *= factor;
            cfg.nest = cfg.nest.scaled(factor);
        }
        if !(cfg.arena_w > 0.0 && cfg.arena_h > 0.0) {
            return Err(SimError::InvalidConfig("arena dimensions must be positive".into()));
        }
        if cfg.nest.w <= 0.0
            || cfg.nest.h <= 0.0
            || cfg.nest.x < 0.0
            || cfg.nest.y < 0.0
            || cfg.nest.x + cfg.nest.w > cfg.arena_w
            || cfg.nest.y + cfg.nest.h > cfg.arena_h
        {
            return Err(SimError::InvalidConfig("nest must lie within the arena".into()));
        }
        if cfg.nest.w * cfg.nest.h >= cfg.arena_w * cfg.arena_h {
            return Err(SimError::InvalidConfig("nest covers the whole arena".into()));
        }
        if cfg.n_blocks == 0 {
            return Err(SimError::InvalidConfig("need at least one block".into()));
        }
        if !(0.0..=1.0).contains(&cfg.p_rw) {
            return Err(SimError::InvalidConfig(format!("p_rw {} outside [0, 1]", cfg.p_rw)));
        }
        if cfg.duration == 0 || cfg.interval_len == 0 {
            return Err(SimError::InvalidConfig("duration and interval_len must be >= 1".into()));
        }
        if [cfg.max_speed, cfg.pickup_radius, cfg.max_turn].iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(SimError::InvalidConfig(
                "max_speed, max_turn and pickup_radius must be positive".into(),
            ));
        }
        if cfg.avoid_duration == 0 {
            return Err(SimError::InvalidConfig("avoid_duration must be >= 1".into()));
        }
        if let BlockDistribution::PowerLaw { clusters, exponent } = cfg.distribution {
            if clusters == 0 || !exponent.is_finite() || exponent <= 0.0 {
                return Err(SimError::InvalidConfig(
                    "power law needs clusters >= 1 and exponent > 0".into(),
                ));
            }
        }
        Ok(cfg)
    }
}

/// The perturbations applied to a run; all optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Perturbations {
    pub throttle: Option<VarianceProfile>,
    pub noise: Option<NoiseProfile>,
    pub population: Option<PopulationProfile>,
}

impl Perturbations {
    /// Condition tag describing the perturbations, e.g.
    /// `noise-sigma-0.02+throttle-square-0.4`.
    pub fn condition_tag(&self) -> String {
        let mut parts = Vec::new();
        if let Some(t) = &self.throttle {
            if t.amplitude > 0.0 {
                parts.push(format!("throttle-{:?}-{}", t.kind, t.amplitude).to_lowercase());
            }
        }
        if let Some(n) = &self.noise {
            if n.sigma > 0.0 {
                parts.push(format!("noise-sigma-{}", n.sigma));
            }
        }
        if let Some(p) = &self.population {
            if !p.is_inert() {
                parts.push(format!(
                    "pop-d{}-bd{}-b{}-r{}",
                    p.rates.lambda_d, p.rates.lambda_bd, p.rates.mu_b, p.rates.mu_bd
                ));
            }
        }
        if parts.is_empty() {
            "ideal".to_string()
        } else {
            parts.join("+")
        }
    }
}

/// Movement mode of one robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobotMode {
    Exploring,
    /// Evading a too-close neighbor for the remaining countdown steps.
    Avoiding { countdown: u32 },
    Carrying,
}

impl RobotMode {
    fn name(&self) -> &'static str {
        match self {
            RobotMode::Exploring => "exploring",
            RobotMode::Avoiding { .. } => "avoiding",
            RobotMode::Carrying => "carrying",
        }
    }
}

/// One robot's full state.
#[derive(Debug, Clone)]
pub struct Robot {
    pub position: Vec2,
    pub heading: f64,
    pub mode: RobotMode,
    pub carried_block: Option<usize>,
    pub memory: ControllerMemory,
    pub standing: RobotStanding,
}

impl Robot {
    pub fn active(&self) -> bool {
        self.standing == RobotStanding::Active
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockState {
    Free,
    Carried,
    InNest,
}

/// One forageable block.
#[derive(Debug, Clone)]
pub struct Block {
    pub position: Vec2,
    pub cluster_id: u32,
    pub state: BlockState,
}

/// Counters reported by one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepEvents {
    /// Blocks deposited in the nest this step.
    pub collected: u32,
    /// Blocks picked up for the first time ever this step.
    pub first_pickups: u32,
    /// Active robots in avoiding mode after interference resolution.
    pub avoiding: u32,
    /// Robots active this step.
    pub active: u32,
}

/// One row of the optional per-step debug trace.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub t: u64,
    pub robot: usize,
    pub x: f64,
    pub y: f64,
    pub mode: &'static str,
}

struct Streams {
    placement: ChaCha8Rng,
    controller: ChaCha8Rng,
    noise: ChaCha8Rng,
    population: ChaCha8Rng,
    block_motion: ChaCha8Rng,
}

impl Streams {
    fn from_seed(seed: u64) -> Self {
        let derive = |tag: u64| ChaCha8Rng::seed_from_u64(mix_u64(mix_u64(0x5741_524d, seed), tag));
        Self {
            placement: derive(1),
            controller: derive(2),
            noise: derive(3),
            population: derive(4),
            block_motion: derive(5),
        }
    }
}

/// The simulation state; create with [`World::new`], advance with
/// [`World::step`], or drive a whole run with [`run`].
pub struct World {
    cfg: WorldConfig,
    controller: Controller,
    perturbations: Perturbations,
    noise: NoiseInjector,
    streams: Streams,
    t: u64,
    robots: Vec<Robot>,
    blocks: Vec<Block>,
    cluster_boxes: Vec<Rect>,
    first_pickup_latch: Vec<bool>,
    // Cumulative telemetry.
    total_collected: u64,
    total_pickups: u64,
    total_first_pickups: u64,
    search_distance: f64,
    trace: Option<Vec<TraceRow>>,
}

const PLACEMENT_ATTEMPTS: u32 = 10_000;

impl World {
    pub fn new(
        config: &WorldConfig,
        controller: Controller,
        perturbations: Perturbations,
    ) -> Result<Self, SimError> {
        let cfg = config.resolved()?;
        if let Some(p) = &perturbations.population {
            p.rates.validate().map_err(|e| SimError::InvalidConfig(e.to_string()))?;
            if p.max_population != cfg.n_robots {
                return Err(SimError::InvalidConfig(format!(
                    "population profile max {} does not match n_robots {}",
                    p.max_population, cfg.n_robots
                )));
            }
            if p.initial_tasked > p.max_population {
                return Err(SimError::InvalidConfig(format!(
                    "initial tasked {} exceeds max population {}",
                    p.initial_tasked, p.max_population
                )));
            }
        }

        let mut streams = Streams::from_seed(cfg.seed);
        let noise_profile =
            perturbations.noise.clone().unwrap_or(NoiseProfile { sigma: 0.0, channels: vec![] });
        if noise_profile.sigma < 0.0 {
            return Err(SimError::InvalidConfig("noise sigma must be >= 0".into()));
        }
        let scales = FullScales {
            position: (cfg.arena_w * cfg.arena_w + cfg.arena_h * cfg.arena_h).sqrt(),
            bearing: std::f64::consts::PI,
            speed: cfg.max_speed,
            turn: cfg.max_turn,
            block_detect: controller.sense_radius(cfg.pickup_radius),
        };
        let noise = NoiseInjector::new(noise_profile, scales, (cfg.arena_w, cfg.arena_h));

        let initial_tasked = perturbations.population.as_ref().map(|p| p.initial_tasked);
        let robots = place_robots(&cfg, initial_tasked, &mut streams.placement)?;
        let (blocks, cluster_boxes) = place_blocks(&cfg, &mut streams.placement)?;
        let n_blocks = blocks.len();

        Ok(Self {
            cfg,
            controller,
            perturbations,
            noise,
            streams,
            t: 0,
            robots,
            blocks,
            cluster_boxes,
            first_pickup_latch: vec![false; n_blocks],
            total_collected: 0,
            total_pickups: 0,
            total_first_pickups: 0,
            search_distance: 0.0,
            trace: None,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.cfg
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn robots(&self) -> &[Robot] {
        &self.robots
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn active_count(&self) -> u32 {
        self.robots.iter().filter(|r| r.active()).count() as u32
    }

    pub fn total_collected(&self) -> u64 {
        self.total_collected
    }

    pub fn total_pickups(&self) -> u64 {
        self.total_pickups
    }

    pub fn total_first_pickups(&self) -> u64 {
        self.total_first_pickups
    }

    /// Cumulative distance traveled by active robots while not carrying.
    pub fn search_distance(&self) -> f64 {
        self.search_distance
    }

    /// Start collecting a per-step position/mode trace.
    pub fn record_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn trace(&self) -> Option<&[TraceRow]> {
        self.trace.as_deref()
    }

    fn arena_clamp(&self, p: Vec2) -> Vec2 {
        Vec2::new(p.x.clamp(0.0, self.cfg.arena_w), p.y.clamp(0.0, self.cfg.arena_h))
    }

    /// Advances the world one timestep.
    ///
    /// Order within the step: population events, block motion, robot
    /// sense/decide/actuate, interference resolution, pickup/drop
    /// resolution, event recording.
    pub fn step(&mut self) -> StepEvents {
        let mut events = StepEvents::default();

        // 1. Population events.
        if let Some(profile) = self.perturbations.population {
            self.apply_population_events(&profile.rates);
        }

        // 2. Free blocks random-walk one grid step.
        if self.cfg.p_rw > 0.0 {
            self.move_blocks();
        }

        // 3. Robots sense, decide and move.
        let throttle = self
            .perturbations
            .throttle
            .as_ref()
            .map(|p| (throttle_factor(p, self.t), p.target))
            .unwrap_or((1.0, ThrottleTarget::AllSpeed));
        let mut pickup_intents: Vec<(usize, usize)> = Vec::new();
        let mut drop_intents: Vec<usize> = Vec::new();
        for i in 0..self.robots.len() {
            if !self.robots[i].active() {
                continue;
            }
            let carrying = self.robots[i].carried_block.is_some();
            let cap = self.cfg.max_speed
                * match throttle.1 {
                    ThrottleTarget::AllSpeed => throttle.0,
                    ThrottleTarget::CarrySpeed if carrying => throttle.0,
                    ThrottleTarget::CarrySpeed => 1.0,
                };
            let action = match self.robots[i].mode {
                RobotMode::Avoiding { countdown } => {
                    let remaining = countdown.saturating_sub(1);
                    self.robots[i].mode = if remaining == 0 {
                        if carrying {
                            RobotMode::Carrying
                        } else {
                            RobotMode::Exploring
                        }
                    } else {
                        RobotMode::Avoiding { countdown: remaining }
                    };
                    // Keep steering apart on the evasion heading.
                    Action { turn: 0.0, speed_frac: 1.0, pickup: None, drop: false }
                }
                _ => {
                    let sensed = self.sense(i);
                    let mut memory = std::mem::take(&mut self.robots[i].memory);
                    let action = self.controller.decide(
                        &sensed,
                        &mut memory,
                        self.cfg.pickup_radius,
                        &mut self.streams.controller,
                    );
                    self.robots[i].memory = memory;
                    action
                }
            };

            let turn = self.noise.act_turn(
                action.turn.clamp(-self.cfg.max_turn, self.cfg.max_turn),
                self.cfg.max_turn,
                &mut self.streams.noise,
            );
            let speed = self.noise.act_speed(
                action.speed_frac.clamp(0.0, 1.0) * cap,
                cap,
                &mut self.streams.noise,
            );
            let robot = &mut self.robots[i];
            robot.heading = wrap_angle(robot.heading + turn);
            let before = robot.position;
            let delta = Vec2::new(robot.heading.cos() * speed, robot.heading.sin() * speed);
            robot.position = Vec2::new(
                (before.x + delta.x).clamp(0.0, self.cfg.arena_w),
                (before.y + delta.y).clamp(0.0, self.cfg.arena_h),
            );
            if robot.carried_block.is_none() {
                self.search_distance += before.dist(robot.position);
            }
            if let Some(block) = action.pickup {
                pickup_intents.push((i, block));
            }
            if action.drop {
                drop_intents.push(i);
            }
        }

        // 4. Interference: any two active robots within the interference
        // radius both start avoiding, steering apart.
        self.resolve_interference();

        // 5. Pickups and drop-offs, in robot index order.
        for (robot_idx, block_idx) in pickup_intents {
            self.try_pickup(robot_idx, block_idx, &mut events);
        }
        for robot_idx in drop_intents {
            self.try_drop(robot_idx, &mut events);
        }

        // 6. Record.
        for robot in &self.robots {
            if robot.active() {
                events.active += 1;
                if matches!(robot.mode, RobotMode::Avoiding { .. }) {
                    events.avoiding += 1;
                }
            }
        }
        if let Some(trace) = &mut self.trace {
            let t = self.t;
            for (i, robot) in self.robots.iter().enumerate() {
                if robot.active() {
                    trace.push(TraceRow {
                        t,
                        robot: i,
                        x: robot.position.x,
                        y: robot.position.y,
                        mode: robot.mode.name(),
                    });
                }
            }
        }

        self.t += 1;
        events
    }

    fn sense(&mut self, robot_idx: usize) -> Sensed {
        let radius = self.controller.sense_radius(self.cfg.pickup_radius);
        let robot = &self.robots[robot_idx];
        let true_pos = robot.position;
        let beacon = self.controller.beacon().unwrap_or_else(|| self.cfg.nest.center());

        let mut blocks = Vec::new();
        for (id, block) in self.blocks.iter().enumerate() {
            if block.state == BlockState::Free && true_pos.dist(block.position) <= radius {
                blocks.push((id, block.position));
            }
        }
        for (_, p) in blocks.iter_mut() {
            *p = self.noise.sense_block(*p, &mut self.streams.noise);
        }

        let position = self.noise.sense_position(true_pos, &mut self.streams.noise);
        let nest_bearing =
            self.noise.sense_bearing(true_pos.bearing_to(beacon), &mut self.streams.noise);
        Sensed {
            position,
            heading: robot.heading,
            nest_bearing,
            inside_nest: self.cfg.nest.contains(position),
            blocks,
            carrying: robot.carried_block.is_some(),
        }
    }

    fn resolve_interference(&mut self) {
        let radius = self.cfg.interference_radius;
        if radius <= 0.0 {
            return;
        }
        let positions: Vec<(usize, Vec2)> = self
            .robots
            .iter()
            .enumerate()
            .filter(|(_, r)| r.active())
            .map(|(i, r)| (i, r.position))
            .collect();
        let mut nearest: Vec<Option<(usize, f64)>> = vec![None; self.robots.len()];
        for a in 0..positions.len() {
            for b in a + 1..positions.len() {
                let (i, pi) = positions[a];
                let (j, pj) = positions[b];
                let d = pi.dist(pj);
                if d <= radius {
                    if nearest[i].is_none_or(|(_, best)| d < best) {
                        nearest[i] = Some((j, d));
                    }
                    if nearest[j].is_none_or(|(_, best)| d < best) {
                        nearest[j] = Some((i, d));
                    }
                }
            }
        }
        for (i, hit) in nearest.iter().enumerate() {
            let Some((j, d)) = *hit else { continue };
            let away = if d < 1e-12 {
                // Coincident robots split along the x axis by index.
                if i < j {
                    0.0
                } else {
                    std::f64::consts::PI
                }
            } else {
                self.robots[j].position.bearing_to(self.robots[i].position)
            };
            let robot = &mut self.robots[i];
            robot.mode = RobotMode::Avoiding { countdown: self.cfg.avoid_duration };
            robot.heading = away;
        }
    }

    fn try_pickup(&mut self, robot_idx: usize, block_idx: usize, events: &mut StepEvents) {
        if block_idx >= self.blocks.len() {
            return;
        }
        let robot_pos = self.robots[robot_idx].position;
        if !self.robots[robot_idx].active() || self.robots[robot_idx].carried_block.is_some() {
            return;
        }
        let block = &mut self.blocks[block_idx];
        if block.state != BlockState::Free || robot_pos.dist(block.position) > self.cfg.pickup_radius
        {
            return;
        }
        block.state = BlockState::Carried;
        let robot = &mut self.robots[robot_idx];
        robot.carried_block = Some(block_idx);
        if !matches!(robot.mode, RobotMode::Avoiding { .. }) {
            robot.mode = RobotMode::Carrying;
        }
        self.total_pickups += 1;
        if !self.first_pickup_latch[block_idx] {
            self.first_pickup_latch[block_idx] = true;
            self.total_first_pickups += 1;
            events.first_pickups += 1;
        }
    }

    fn try_drop(&mut self, robot_idx: usize, events: &mut StepEvents) {
        let robot_pos = self.robots[robot_idx].position;
        let Some(block_idx) = self.robots[robot_idx].carried_block else { return };
        if !self.cfg.nest.contains(robot_pos) {
            return;
        }
        self.blocks[block_idx].position = robot_pos;
        self.blocks[block_idx].state = BlockState::InNest;
        let robot = &mut self.robots[robot_idx];
        robot.carried_block = None;
        if !matches!(robot.mode, RobotMode::Avoiding { .. }) {
            robot.mode = RobotMode::Exploring;
        }
        self.total_collected += 1;
        events.collected += 1;
        if self.cfg.block_respawn {
            self.respawn_block(block_idx);
        }
    }

    fn respawn_block(&mut self, block_idx: usize) {
        let position = draw_block_position(
            &self.cfg,
            &self.cluster_boxes,
            self.blocks[block_idx].cluster_id,
            &mut self.streams.placement,
        );
        let block = &mut self.blocks[block_idx];
        // The arena placed these blocks once, so a respawn can only fail
        // if the free area vanished; in that case the block stays in the
        // nest.
        if let Ok((pos, cluster_id)) = position {
            block.position = pos;
            block.cluster_id = cluster_id;
            block.state = BlockState::Free;
        }
    }

    fn move_blocks(&mut self) {
        for block in &mut self.blocks {
            if block.state != BlockState::Free {
                continue;
            }
            if self.streams.block_motion.random::<f64>() >= self.cfg.p_rw {
                continue;
            }
            let dir = self.streams.block_motion.random_range(0..4u8);
            let step = self.cfg.block_step;
            let delta = match dir {
                0 => Vec2::new(step, 0.0),
                1 => Vec2::new(-step, 0.0),
                2 => Vec2::new(0.0, step),
                _ => Vec2::new(0.0, -step),
            };
            let candidate = Vec2::new(
                (block.position.x + delta.x).clamp(0.0, self.cfg.arena_w),
                (block.position.y + delta.y).clamp(0.0, self.cfg.arena_h),
            );
            // Free blocks stay outside the nest.
            if !self.cfg.nest.contains(candidate) {
                block.position = candidate;
            }
        }
    }

    fn apply_population_events(&mut self, rates: &crate::robustness::QueueRates) {
        let standings: Vec<RobotStanding> = self.robots.iter().map(|r| r.standing).collect();
        let events = population_events(rates, &standings, &mut self.streams.population);
        for (idx, event) in events {
            match event {
                PopulationEvent::RemovePermanent => self.remove_robot(idx, RobotStanding::Dead),
                PopulationEvent::RemoveTemporary => {
                    self.remove_robot(idx, RobotStanding::AbsentTemporary)
                }
                PopulationEvent::Return | PopulationEvent::Join => self.admit_robot(idx),
            }
        }
    }

    fn remove_robot(&mut self, idx: usize, standing: RobotStanding) {
        if let Some(block_idx) = self.robots[idx].carried_block.take() {
            // The cargo is released where the robot stood, nudged outside
            // the nest if necessary.
            let released = self.cfg.nest.push_out(self.robots[idx].position);
            self.blocks[block_idx].position = self.arena_clamp(released);
            self.blocks[block_idx].state = BlockState::Free;
        }
        let robot = &mut self.robots[idx];
        robot.standing = standing;
        robot.mode = RobotMode::Exploring;
        robot.memory.clear();
    }

    fn admit_robot(&mut self, idx: usize) {
        // Returning and joining robots re-enter at the nest edge with a
        // cleared world model.
        let u: f64 = self.streams.population.random();
        let robot = &mut self.robots[idx];
        robot.position = self.cfg.nest.perimeter_point(u);
        robot.heading = 0.0;
        robot.standing = RobotStanding::Active;
        robot.mode = RobotMode::Exploring;
        robot.memory.clear();
    }
}

fn place_robots(
    cfg: &WorldConfig,
    initial_tasked: Option<u32>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Robot>, SimError> {
    let tasked = initial_tasked.unwrap_or(cfg.n_robots);
    let mut robots = Vec::with_capacity(cfg.n_robots as usize);
    for i in 0..cfg.n_robots {
        let position = sample_outside_nest(cfg, rng).ok_or_else(|| {
            SimError::PlacementInfeasible("no room outside the nest for robots".into())
        })?;
        let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        robots.push(Robot {
            position,
            heading,
            mode: RobotMode::Exploring,
            carried_block: None,
            memory: ControllerMemory::default(),
            standing: if i < tasked { RobotStanding::Active } else { RobotStanding::Reserve },
        });
    }
    Ok(robots)
}

fn sample_outside_nest(cfg: &WorldConfig, rng: &mut ChaCha8Rng) -> Option<Vec2> {
    for _ in 0..PLACEMENT_ATTEMPTS {
        let p = Vec2::new(rng.random_range(0.0..cfg.arena_w), rng.random_range(0.0..cfg.arena_h));
        if !cfg.nest.contains(p) {
            return Some(p);
        }
    }
    None
}

fn sample_in_box_outside_nest(cfg: &WorldConfig, rect: &Rect, rng: &mut ChaCha8Rng) -> Option<Vec2> {
    for _ in 0..PLACEMENT_ATTEMPTS {
        let p = Vec2::new(
            rng.random_range(rect.x..rect.x + rect.w),
            rng.random_range(rect.y..rect.y + rect.h),
        );
        if !cfg.nest.contains(p) {
            return Some(p);
        }
    }
    None
}

/// The compact source region single-source layouts use: a box on the far
/// side of the arena from the nest.
fn single_source_box(cfg: &WorldConfig) -> Rect {
    let arena_center = Vec2::new(cfg.arena_w / 2.0, cfg.arena_h / 2.0);
    let nest_center = cfg.nest.center();
    let vx = arena_center.x - nest_center.x;
    let vy = arena_center.y - nest_center.y;
    let norm = (vx * vx + vy * vy).sqrt();
    let min_dim = cfg.arena_w.min(cfg.arena_h);
    let center = if norm < 1e-9 {
        // Nest dead center: default to the east side.
        Vec2::new(cfg.arena_w * 0.75, cfg.arena_h / 2.0)
    } else {
        Vec2::new(
            arena_center.x + vx / norm * min_dim * 0.25,
            arena_center.y + vy / norm * min_dim * 0.25,
        )
    };
    let half = (min_dim * 0.1).max(0.25);
    Rect {
        x: (center.x - half).clamp(0.0, (cfg.arena_w - 2.0 * half).max(0.0)),
        y: (center.y - half).clamp(0.0, (cfg.arena_h - 2.0 * half).max(0.0)),
        w: (2.0 * half).min(cfg.arena_w),
        h: (2.0 * half).min(cfg.arena_h),
    }
}

/// Cluster box around a sampled center.
fn cluster_box(cfg: &WorldConfig, center: Vec2) -> Rect {
    let half = (cfg.arena_w.min(cfg.arena_h) * 0.06).max(0.25);
    Rect {
        x: (center.x - half).clamp(0.0, (cfg.arena_w - 2.0 * half).max(0.0)),
        y: (center.y - half).clamp(0.0, (cfg.arena_h - 2.0 * half).max(0.0)),
        w: (2.0 * half).min(cfg.arena_w),
        h: (2.0 * half).min(cfg.arena_h),
    }
}

/// Draws cluster sizes from a discrete power law `p(s) ~ s^-exponent`
/// on `1..=n_blocks`, then rescales them to sum to exactly `n_blocks`
/// (largest remainder method).
fn power_law_sizes(
    n_blocks: u32,
    clusters: u32,
    exponent: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<u32> {
    let support = n_blocks as usize;
    let mut cumulative = Vec::with_capacity(support);
    let mut total = 0.0;
    for s in 1..=support {
        total += (s as f64).powf(-exponent);
        cumulative.push(total);
    }
    let mut raw = Vec::with_capacity(clusters as usize);
    for _ in 0..clusters {
        let u: f64 = rng.random_range(0.0..total);
        let idx = cumulative.partition_point(|&c| c < u);
        raw.push((idx + 1).min(support) as f64);
    }
    let raw_sum: f64 = raw.iter().sum();
    let scaled: Vec<f64> = raw.iter().map(|s| s * n_blocks as f64 / raw_sum).collect();
    let mut sizes: Vec<u32> = scaled.iter().map(|q| q.floor() as u32).collect();
    let mut remainder = n_blocks - sizes.iter().sum::<u32>();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        (scaled[b] - scaled[b].floor())
            .total_cmp(&(scaled[a] - scaled[a].floor()))
            .then(a.cmp(&b))
    });
    let mut i = 0;
    while remainder > 0 {
        sizes[order[i % order.len()]] += 1;
        remainder -= 1;
        i += 1;
    }
    sizes
}

type PlacedBlocks = (Vec<Block>, Vec<Rect>);

fn place_blocks(cfg: &WorldConfig, rng: &mut ChaCha8Rng) -> Result<PlacedBlocks, SimError> {
    let mut blocks = Vec::with_capacity(cfg.n_blocks as usize);
    let mut boxes = Vec::new();
    match cfg.distribution {
        BlockDistribution::Random => {
            for _ in 0..cfg.n_blocks {
                let position = sample_outside_nest(cfg, rng).ok_or_else(|| {
                    SimError::PlacementInfeasible("no room outside the nest for blocks".into())
                })?;
                blocks.push(Block { position, cluster_id: 0, state: BlockState::Free });
            }
        }
        BlockDistribution::SingleSource => {
            let source = single_source_box(cfg);
            for _ in 0..cfg.n_blocks {
                let position = sample_in_box_outside_nest(cfg, &source, rng).ok_or_else(|| {
                    SimError::PlacementInfeasible("single-source box overlaps the nest".into())
                })?;
                blocks.push(Block { position, cluster_id: 0, state: BlockState::Free });
            }
            boxes.push(source);
        }
        BlockDistribution::PowerLaw { clusters, exponent } => {
            let sizes = power_law_sizes(cfg.n_blocks, clusters, exponent, rng);
            for (cluster_id, &size) in sizes.iter().enumerate() {
                let center = sample_outside_nest(cfg, rng).ok_or_else(|| {
                    SimError::PlacementInfeasible("no room for cluster centers".into())
                })?;
                let cbox = cluster_box(cfg, center);
                for _ in 0..size {
                    let position =
                        sample_in_box_outside_nest(cfg, &cbox, rng).ok_or_else(|| {
                            SimError::PlacementInfeasible("cluster box overlaps the nest".into())
                        })?;
                    blocks.push(Block {
                        position,
                        cluster_id: cluster_id as u32,
                        state: BlockState::Free,
                    });
                }
                boxes.push(cbox);
            }
        }
    }
    Ok((blocks, boxes))
}

/// Fresh position for a respawned block under the world's distribution.
fn draw_block_position(
    cfg: &WorldConfig,
    cluster_boxes: &[Rect],
    _old_cluster: u32,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec2, u32), SimError> {
    match cfg.distribution {
        BlockDistribution::Random => {
            let p = sample_outside_nest(cfg, rng)
                .ok_or_else(|| SimError::PlacementInfeasible("respawn failed".into()))?;
            Ok((p, 0))
        }
        BlockDistribution::SingleSource | BlockDistribution::PowerLaw { .. } => {
            let idx = if cluster_boxes.len() > 1 {
                rng.random_range(0..cluster_boxes.len())
            } else {
                0
            };
            let p = sample_in_box_outside_nest(cfg, &cluster_boxes[idx], rng)
                .ok_or_else(|| SimError::PlacementInfeasible("respawn failed".into()))?;
            Ok((p, idx as u32))
        }
    }
}

/// Executes a full run and aggregates its curves.
///
/// Performance events are nest deposits or first-ever pickups depending
/// on `config.perf_event`; the interference value of an interval is the
/// fraction of active robot-steps spent in avoiding mode; the population
/// trace samples the tasked size at each interval end.
pub fn run(
    config: &WorldConfig,
    controller: Controller,
    perturbations: Perturbations,
) -> Result<CurveBundle, SimError> {
    run_traced(config, controller, perturbations, false).map(|(bundle, _)| bundle)
}

/// [`run`] with an optional per-step debug trace of robot positions.
pub fn run_traced(
    config: &WorldConfig,
    controller: Controller,
    perturbations: Perturbations,
    trace: bool,
) -> Result<(CurveBundle, Vec<TraceRow>), SimError> {
    let cfg = config.resolved()?;
    if cfg.n_robots == 0 {
        return Err(SimError::InvalidConfig("a run needs at least one robot".into()));
    }
    if cfg.duration < cfg.interval_len as u64 {
        return Err(SimError::InvalidConfig(format!(
            "duration {} shorter than one interval of {}",
            cfg.duration, cfg.interval_len
        )));
    }
    let condition = perturbations.condition_tag();
    let controller_id = controller.id().to_string();
    let mut world = World::new(&cfg, controller, perturbations)?;
    if trace {
        world.record_trace();
    }

    let interval_len = cfg.interval_len as u64;
    let n_intervals = (cfg.duration / interval_len) as usize;
    let mut per_step_events: Vec<u64> = Vec::with_capacity((n_intervals * interval_len as usize).min(1 << 24));
    let mut interference = Vec::with_capacity(n_intervals);
    let mut population = Vec::with_capacity(n_intervals);
    let mut avoiding_steps: u64 = 0;
    let mut active_steps: u64 = 0;

    for t in 0..n_intervals as u64 * interval_len {
        let events = world.step();
        let perf_event_count = match cfg.perf_event {
            PerfEvent::Collection => events.collected,
            PerfEvent::FirstPickup => events.first_pickups,
        };
        per_step_events.push(perf_event_count as u64);
        avoiding_steps += events.avoiding as u64;
        active_steps += events.active as u64;
        if (t + 1) % interval_len == 0 {
            let fraction = if active_steps == 0 {
                0.0
            } else {
                avoiding_steps as f64 / active_steps as f64
            };
            interference.push(fraction);
            population.push(world.active_count());
            avoiding_steps = 0;
            active_steps = 0;
        }
    }

    let performance = aggregate_events(
        &per_step_events,
        cfg.interval_len,
        cfg.n_robots,
        controller_id.clone(),
        condition.clone(),
    )?;
    let interference =
        InterferenceCurve::new(interference, cfg.interval_len, cfg.n_robots, controller_id, condition)?;
    let population = PopulationCurve::new(population, cfg.interval_len, cfg.n_robots)?;
    let bundle = CurveBundle::new(performance, interference, population, cfg.seed)?;
    let trace_rows = world.trace.take().unwrap_or_default();
    Ok((bundle, trace_rows))
}

#[cfg(test)]
mod tests;
