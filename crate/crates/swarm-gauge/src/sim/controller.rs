//! Robot control algorithms: correlated random walk (CRW) and decaying
//! pheromone object tracking (DPO).
//!
//! Controllers are pure decision functions over what the robot senses
//! this step plus its private memory; the world applies the returned
//! action. CRW keeps no memory at all. DPO remembers blocks it has seen
//! with an exponentially decaying pheromone density and, when free,
//! heads for the tracked block with the highest relevance
//! `density / (1 + distance)`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::util::{wrap_angle, Vec2};

/// Correlated random walk parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrwParams {
    /// Standard deviation of the per-step heading change while
    /// exploring; smaller values mean straighter walks.
    pub turn_stddev: f64,
    /// Phototaxis beacon the carrying robot homes on; `None` means the
    /// nest center.
    #[serde(default)]
    pub nest_light_position: Option<(f64, f64)>,
}

impl Default for CrwParams {
    fn default() -> Self {
        Self { turn_stddev: 0.3, nest_light_position: None }
    }
}

/// Decaying pheromone object tracker parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpoParams {
    /// Per-step multiplicative pheromone decay, in (0, 1).
    pub decay_rho: f64,
    /// How far the robot can see blocks, in meters.
    pub sense_radius: f64,
    /// Tracked blocks whose density decays below this are forgotten.
    pub relevance_floor: f64,
}

impl Default for DpoParams {
    fn default() -> Self {
        Self { decay_rho: 0.98, sense_radius: 1.0, relevance_floor: 0.05 }
    }
}

/// A block position remembered with its pheromone density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedBlock {
    pub position: Vec2,
    pub density: f64,
}

/// Controller-private store; empty for CRW, the pheromone map for DPO.
///
/// Keyed by block id in a BTreeMap so iteration order (and therefore
/// target tie-breaking) is deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ControllerMemory {
    pub tracked: BTreeMap<usize, TrackedBlock>,
}

impl ControllerMemory {
    pub fn is_empty(&self) -> bool {
        self.tracked.is_empty()
    }

    pub fn clear(&mut self) {
        self.tracked.clear();
    }
}

/// What one robot perceives this step (already noise-perturbed).
#[derive(Debug, Clone)]
pub struct Sensed {
    /// Perceived own position.
    pub position: Vec2,
    /// Current heading (proprioceptive, noise-free).
    pub heading: f64,
    /// Perceived bearing to the nest light.
    pub nest_bearing: f64,
    /// Whether the perceived position lies inside the nest.
    pub inside_nest: bool,
    /// Perceived positions of visible blocks, by block id.
    pub blocks: Vec<(usize, Vec2)>,
    /// Whether the robot currently carries a block.
    pub carrying: bool,
}

/// What the robot wants to do this step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    /// Desired heading change in radians.
    pub turn: f64,
    /// Desired speed as a fraction of the maximum, in [0, 1].
    pub speed_frac: f64,
    /// Try to pick up this block.
    pub pickup: Option<usize>,
    /// Try to drop the carried block.
    pub drop: bool,
}

/// Which control algorithm a robot runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Controller {
    Crw(CrwParams),
    Dpo(DpoParams),
}

impl Controller {
    pub fn id(&self) -> &'static str {
        match self {
            Controller::Crw(_) => "crw",
            Controller::Dpo(_) => "dpo",
        }
    }

    /// Sensing range the world should gather blocks within. CRW is
    /// purely reactive: it only looks as far as it can grab.
    pub fn sense_radius(&self, pickup_radius: f64) -> f64 {
        match self {
            Controller::Crw(_) => pickup_radius,
            Controller::Dpo(p) => p.sense_radius.max(pickup_radius),
        }
    }

    /// Beacon the homing bearing points at, if the controller overrides
    /// the nest center.
    pub fn beacon(&self) -> Option<Vec2> {
        match self {
            Controller::Crw(p) => p.nest_light_position.map(|(x, y)| Vec2::new(x, y)),
            Controller::Dpo(_) => None,
        }
    }

    pub fn decide(
        &self,
        sensed: &Sensed,
        memory: &mut ControllerMemory,
        pickup_radius: f64,
        rng: &mut impl Rng,
    ) -> Action {
        match self {
            Controller::Crw(params) => crw_decide(sensed, params, pickup_radius, rng),
            Controller::Dpo(params) => dpo_decide(sensed, memory, params, pickup_radius, rng),
        }
    }
}

fn nearest_block(sensed: &Sensed) -> Option<(usize, Vec2, f64)> {
    sensed
        .blocks
        .iter()
        .map(|&(id, p)| (id, p, sensed.position.dist(p)))
        .min_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)))
}

fn home_to_nest(sensed: &Sensed) -> Action {
    Action {
        turn: wrap_angle(sensed.nest_bearing - sensed.heading),
        speed_frac: 1.0,
        pickup: None,
        drop: sensed.inside_nest,
    }
}

fn explore(
    sensed: &Sensed,
    turn_stddev: f64,
    pickup_radius: f64,
    rng: &mut impl Rng,
) -> Action {
    let turn = if turn_stddev > 0.0 {
        Normal::new(0.0, turn_stddev).unwrap().sample(rng)
    } else {
        0.0
    };
    let pickup = nearest_block(sensed)
        .filter(|&(_, _, dist)| dist <= pickup_radius)
        .map(|(id, _, _)| id);
    Action { turn, speed_frac: 1.0, pickup, drop: false }
}

/// Correlated random walk: wander while free, home on the nest light
/// while carrying. Reactive; uses no memory.
pub fn crw_decide(
    sensed: &Sensed,
    params: &CrwParams,
    pickup_radius: f64,
    rng: &mut impl Rng,
) -> Action {
    if sensed.carrying {
        home_to_nest(sensed)
    } else {
        explore(sensed, params.turn_stddev, pickup_radius, rng)
    }
}

/// Decaying pheromone object tracker: decay and refresh the memory,
/// then head for the most relevant tracked block; explore like CRW when
/// the memory is empty and home like CRW when carrying.
pub fn dpo_decide(
    sensed: &Sensed,
    memory: &mut ControllerMemory,
    params: &DpoParams,
    pickup_radius: f64,
    rng: &mut impl Rng,
) -> Action {
    // Decay first, then refresh what is visible right now at density 1.
    memory.tracked.retain(|_, t| {
        t.density *= params.decay_rho;
        t.density >= params.relevance_floor
    });
    for &(id, position) in &sensed.blocks {
        memory.tracked.insert(id, TrackedBlock { position, density: 1.0 });
    }

    if sensed.carrying {
        return home_to_nest(sensed);
    }
    if memory.is_empty() {
        // Fall back to CRW exploration, default correlation.
        return explore(sensed, CrwParams::default().turn_stddev, pickup_radius, rng);
    }

    // Highest relevance wins; ties break on the lowest block id.
    let (_, _, target_pos) = memory
        .tracked
        .iter()
        .map(|(&id, t)| {
            let relevance = t.density / (1.0 + sensed.position.dist(t.position));
            (relevance, id, t.position)
        })
        .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
        .unwrap();

    let pickup = nearest_block(sensed)
        .filter(|&(_, _, dist)| dist <= pickup_radius)
        .map(|(id, _, _)| id);
    Action {
        turn: wrap_angle(sensed.position.bearing_to(target_pos) - sensed.heading),
        speed_frac: 1.0,
        pickup,
        drop: false,
    }
}
