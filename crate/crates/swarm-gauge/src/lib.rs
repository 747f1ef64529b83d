//! Swarm performance analysis toolkit.
//!
//! `swarm-gauge` measures four properties of a robot swarm from its
//! time-series performance curves:
//!
//! * **emergent self-organization** — spatial (sub-linear interference
//!   growth) and task-based (super-linear marginal performance gain),
//! * **scalability** — a Karp-Flatt style degree-of-cooperation measure,
//! * **flexibility** — reactivity and adaptability to changing
//!   environmental conditions, via dynamic time warping,
//! * **robustness** — to sensor/actuator noise and to population
//!   dynamics, backed by an M/M/1 queueing model and a swarm
//!   availability formula.
//!
//! The curves can come from anywhere; [`sim`] provides a deterministic
//! discrete-time foraging simulator that generates them under
//! configurable disturbances, noise and population dynamics, and
//! [`experiment`] sweeps simulator parameters over seeded run batches
//! and computes the full metric suite with confidence intervals.

pub mod curves;
pub mod dtw;
pub mod experiment;
pub mod flexibility;
pub mod robustness;
pub mod scalability;
pub mod selforg;
pub mod sim;

mod stats;
pub mod util;

pub use curves::{CurveBundle, InterferenceCurve, PerformanceCurve, PopulationCurve};
pub use dtw::{dtw_distance, DtwConfig};
