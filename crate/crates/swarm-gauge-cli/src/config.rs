//! The experiment config file: one TOML document with `scenario`,
//! `controllers`, `sweeps`, `metrics` and `output` sections. Unknown
//! keys anywhere are rejected up front.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use swarm_gauge::experiment::{ExperimentPlan, MetricKind, SweepAxis};
use swarm_gauge::sim::controller::Controller;
use swarm_gauge::sim::perturb::NoiseChannel;
use swarm_gauge::sim::{Perturbations, WorldConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: WorldConfig,
    pub controllers: Vec<Controller>,
    /// Perturbations for single `sim` runs; sweeps build their own.
    #[serde(default)]
    pub perturbations: Option<Perturbations>,
    #[serde(default)]
    pub sweeps: SweepSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Swarm sizes to ladder over; defaults to the scenario's robot
    /// count.
    pub swarm_sizes: Vec<u32>,
    pub n_runs: u32,
    pub base_seed: u64,
    pub axes: Vec<SweepAxis>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { swarm_sizes: Vec::new(), n_runs: 24, base_seed: 1, axes: Vec::new() }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    pub requested: Vec<MetricKind>,
    pub availability_n_min: Vec<u32>,
    pub noise_channels: Option<Vec<NoiseChannel>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_plan(&self) -> ExperimentPlan {
        let swarm_sizes = if self.sweeps.swarm_sizes.is_empty() {
            vec![self.scenario.n_robots]
        } else {
            self.sweeps.swarm_sizes.clone()
        };
        ExperimentPlan {
            scenario: self.scenario.clone(),
            controllers: self.controllers.clone(),
            swarm_sizes,
            sweeps: self.sweeps.axes.clone(),
            n_runs: self.sweeps.n_runs,
            base_seed: self.sweeps.base_seed,
            metrics: self.metrics.requested.clone(),
            availability_n_min: self.metrics.availability_n_min.clone(),
            noise_channels: self.metrics.noise_channels.clone(),
        }
    }

    /// Picks the controller a `sim` run should use.
    pub fn controller(&self, wanted: Option<&str>) -> Result<Controller, String> {
        match wanted {
            None => self
                .controllers
                .first()
                .copied()
                .ok_or_else(|| "config lists no controllers".to_string()),
            Some(id) => self
                .controllers
                .iter()
                .find(|c| c.id() == id)
                .copied()
                .ok_or_else(|| {
                    let known: Vec<&str> = self.controllers.iter().map(|c| c.id()).collect();
                    format!("controller {id:?} not in config (have: {})", known.join(", "))
                }),
        }
    }
}
