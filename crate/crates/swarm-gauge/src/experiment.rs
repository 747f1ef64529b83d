//! Batch experiment runner.
//!
//! An [`ExperimentPlan`] names a scenario template, controllers, a swarm
//! size ladder, sweep axes and the metrics wanted. [`expand`] turns it
//! into seeded [`RunSpec`]s (one per controller x size x sweep value x
//! run index, plus the ideal-condition baseline cells the requested
//! metrics need), [`execute`] runs them on a thread pool, and
//! [`compute_suite`] pairs runs with their baselines and produces a
//! [`MetricReport`] with run-level confidence intervals.
//!
//! Every seed is a stable hash of (base seed, cell coordinates, run
//! index), so results are independent of execution order, parallelism
//! and even of which plan a cell appears in — disjoint half-plans merge
//! into exactly the report of the combined plan.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curves::CurveBundle;
use crate::dtw::DtwConfig;
use crate::flexibility::{
    adaptability, reactivity, FlexibilityInput, ReactivityConvention, ThrottleTarget,
    VarianceProfile, WaveformKind,
};
use crate::robustness::{
    availability, pd_robustness, sa_robustness, utilization, QueueRates, RobustnessInput,
};
use crate::scalability::{karp_flatt_scalability, ScalabilityInput};
use crate::selforg::{spatial_selforg, task_selforg, MeasuredPair, SelfOrgInput};
use crate::sim::perturb::{NoiseChannel, NoiseProfile, PopulationProfile};
use crate::sim::{self, Perturbations, WorldConfig};
use crate::sim::controller::Controller;
use crate::stats::mean_ci;
use crate::util::{mix_bytes, mix_u64};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("a plan needs at least 2 runs per cell, got {0}")]
    TooFewRuns(u32),
    #[error("swarm_sizes must be non-empty and strictly increasing")]
    BadSizeLadder,
    #[error("a plan needs at least one controller")]
    NoControllers,
    #[error("self-organization metrics need swarm size 1 in the ladder")]
    MissingUnitSize,
    #[error("world config invalid: {0}")]
    Sim(#[from] sim::SimError),
    #[error("flexibility profile invalid: {0}")]
    Flexibility(#[from] crate::flexibility::FlexibilityError),
}

/// Waveform shape shared by every cell of a throttle sweep; the cell's
/// sweep value supplies the amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThrottleWaveform {
    pub kind: WaveformKind,
    pub period: u64,
    pub phase: f64,
    pub target: ThrottleTarget,
}

impl Default for ThrottleWaveform {
    fn default() -> Self {
        Self {
            kind: WaveformKind::Square,
            period: 5000,
            phase: 0.0,
            target: ThrottleTarget::CarrySpeed,
        }
    }
}

/// One sweep axis with its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepAxis {
    NoiseSigma {
        values: Vec<f64>,
    },
    ThrottleAmplitude {
        values: Vec<f64>,
        #[serde(default)]
        waveform: ThrottleWaveform,
    },
    PopulationRates {
        values: Vec<QueueRates>,
    },
    PRw {
        values: Vec<f64>,
    },
}

/// Metrics a plan can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    SpatialSelforg,
    TaskSelforg,
    Scalability,
    Reactivity,
    Adaptability,
    SaRobustness,
    PdRobustness,
    Availability,
}

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::SpatialSelforg => "spatial_selforg",
            MetricKind::TaskSelforg => "task_selforg",
            MetricKind::Scalability => "scalability",
            MetricKind::Reactivity => "reactivity",
            MetricKind::Adaptability => "adaptability",
            MetricKind::SaRobustness => "sa_robustness",
            MetricKind::PdRobustness => "pd_robustness",
            MetricKind::Availability => "availability",
        }
    }
}

/// The whole experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    /// Scenario template; its `seed` and `n_robots` fields are replaced
    /// per run.
    pub scenario: WorldConfig,
    pub controllers: Vec<Controller>,
    pub swarm_sizes: Vec<u32>,
    #[serde(default)]
    pub sweeps: Vec<SweepAxis>,
    #[serde(default = "default_n_runs")]
    pub n_runs: u32,
    #[serde(default = "default_base_seed")]
    pub base_seed: u64,
    pub metrics: Vec<MetricKind>,
    /// Minimum tasked sizes for availability tables; defaults to the
    /// quartiles of each swarm size.
    #[serde(default)]
    pub availability_n_min: Vec<u32>,
    /// Channels noise sweeps perturb; defaults to all of them.
    #[serde(default)]
    pub noise_channels: Option<Vec<NoiseChannel>>,
}

fn default_n_runs() -> u32 {
    24
}

fn default_base_seed() -> u64 {
    1
}

/// One concrete sweep setting a cell holds on some axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting {
    NoiseSigma(f64),
    ThrottleAmplitude(f64, ThrottleWaveform),
    PopulationRates(QueueRates),
    PRw(f64),
}

impl Setting {
    pub fn axis(&self) -> &'static str {
        match self {
            Setting::NoiseSigma(_) => "noise_sigma",
            Setting::ThrottleAmplitude(..) => "throttle_amplitude",
            Setting::PopulationRates(_) => "population_rates",
            Setting::PRw(_) => "p_rw",
        }
    }

    /// Scalar position of the setting on its axis (lambda sum for rate
    /// tables).
    pub fn x(&self) -> f64 {
        match self {
            Setting::NoiseSigma(s) => *s,
            Setting::ThrottleAmplitude(a, _) => *a,
            Setting::PopulationRates(r) => r.departure_rate(),
            Setting::PRw(p) => *p,
        }
    }

    fn label(&self) -> String {
        match self {
            Setting::PopulationRates(r) => format!(
                "population_rates=d{}-bd{}-b{}-r{}",
                r.lambda_d, r.lambda_bd, r.mu_b, r.mu_bd
            ),
            other => format!("{}={}", other.axis(), other.x()),
        }
    }

    /// The ideal-condition counterpart: perturbations vanish, scenario
    /// characteristics (block motion) stay.
    fn idealized(&self) -> Setting {
        match self {
            Setting::NoiseSigma(_) => Setting::NoiseSigma(0.0),
            Setting::ThrottleAmplitude(_, wf) => Setting::ThrottleAmplitude(0.0, *wf),
            Setting::PopulationRates(_) => Setting::PopulationRates(QueueRates::default()),
            Setting::PRw(p) => Setting::PRw(*p),
        }
    }

    fn hash_into(&self, acc: u64) -> u64 {
        let acc = mix_bytes(acc, self.axis().as_bytes());
        match self {
            Setting::NoiseSigma(s) | Setting::PRw(s) => mix_u64(acc, s.to_bits()),
            Setting::ThrottleAmplitude(a, _) => mix_u64(acc, a.to_bits()),
            Setting::PopulationRates(r) => {
                let acc = mix_u64(acc, r.lambda_d.to_bits());
                let acc = mix_u64(acc, r.lambda_bd.to_bits());
                let acc = mix_u64(acc, r.mu_b.to_bits());
                mix_u64(acc, r.mu_bd.to_bits())
            }
        }
    }
}

/// One seeded simulator run an experiment will execute.
#[derive(Debug, Clone)]
pub struct RunSpec {
    /// Canonical cell label, e.g. `crw/N16/noise_sigma=0.02`.
    pub label: String,
    pub controller: Controller,
    pub swarm_size: u32,
    pub settings: Vec<Setting>,
    pub run_idx: u32,
    pub seed: u64,
    pub config: WorldConfig,
    pub perturbations: Perturbations,
}

fn cell_label(controller: &Controller, size: u32, settings: &[Setting]) -> String {
    let mut label = format!("{}/N{}", controller.id(), size);
    for s in settings {
        label.push('/');
        label.push_str(&s.label());
    }
    label
}

fn cell_seed(base_seed: u64, controller: &Controller, size: u32, settings: &[Setting], run_idx: u32) -> u64 {
    let mut acc = mix_u64(0x5357_4545_5045_4c41, base_seed);
    acc = mix_bytes(acc, controller.id().as_bytes());
    acc = mix_u64(acc, size as u64);
    for s in settings {
        acc = s.hash_into(acc);
    }
    mix_u64(acc, run_idx as u64)
}

fn dedup_f64(values: &[f64], axis: &str, warnings: &mut Vec<String>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &v in values {
        if out.contains(&v) {
            warnings.push(format!("duplicate {axis} value {v} dropped"));
        } else {
            out.push(v);
        }
    }
    out
}

fn settings_combinations(
    sweeps: &[SweepAxis],
    warnings: &mut Vec<String>,
) -> Vec<Vec<Setting>> {
    let mut combos: Vec<Vec<Setting>> = vec![Vec::new()];
    for sweep in sweeps {
        let options: Vec<Setting> = match sweep {
            SweepAxis::NoiseSigma { values } => dedup_f64(values, "noise_sigma", warnings)
                .into_iter()
                .map(Setting::NoiseSigma)
                .collect(),
            SweepAxis::ThrottleAmplitude { values, waveform } => {
                dedup_f64(values, "throttle_amplitude", warnings)
                    .into_iter()
                    .map(|a| Setting::ThrottleAmplitude(a, *waveform))
                    .collect()
            }
            SweepAxis::PopulationRates { values } => {
                let mut out: Vec<QueueRates> = Vec::new();
                for &r in values {
                    if out.contains(&r) {
                        warnings.push(format!("duplicate population_rates value {r:?} dropped"));
                    } else {
                        out.push(r);
                    }
                }
                out.into_iter().map(Setting::PopulationRates).collect()
            }
            SweepAxis::PRw { values } => dedup_f64(values, "p_rw", warnings)
                .into_iter()
                .map(Setting::PRw)
                .collect(),
        };
        combos = combos
            .into_iter()
            .flat_map(|combo| {
                options.iter().map(move |s| {
                    let mut next = combo.clone();
                    next.push(*s);
                    next
                })
            })
            .collect();
    }
    combos
}

fn wants(plan: &ExperimentPlan, metric: MetricKind) -> bool {
    plan.metrics.contains(&metric)
}

fn baseline_needed(plan: &ExperimentPlan, settings: &[Setting]) -> bool {
    settings.iter().any(|s| match s {
        Setting::NoiseSigma(v) => *v > 0.0 && wants(plan, MetricKind::SaRobustness),
        Setting::ThrottleAmplitude(a, _) => {
            *a > 0.0 && (wants(plan, MetricKind::Reactivity) || wants(plan, MetricKind::Adaptability))
        }
        Setting::PopulationRates(r) => !r.is_zero() && wants(plan, MetricKind::PdRobustness),
        Setting::PRw(_) => false,
    })
}

fn build_perturbations(
    plan: &ExperimentPlan,
    settings: &[Setting],
    size: u32,
) -> Result<Perturbations, PlanError> {
    let mut perturbations = Perturbations::default();
    for s in settings {
        match s {
            Setting::NoiseSigma(sigma) => {
                let channels = plan
                    .noise_channels
                    .clone()
                    .unwrap_or_else(|| crate::sim::perturb::ALL_CHANNELS.to_vec());
                perturbations.noise = Some(NoiseProfile { sigma: *sigma, channels });
            }
            Setting::ThrottleAmplitude(amplitude, wf) => {
                let mut profile =
                    VarianceProfile::new(wf.kind, *amplitude, wf.period, wf.target)?;
                profile.phase = wf.phase;
                perturbations.throttle = Some(profile);
            }
            Setting::PopulationRates(rates) => {
                perturbations.population = Some(PopulationProfile::new(*rates, size, size));
            }
            Setting::PRw(_) => {}
        }
    }
    Ok(perturbations)
}

/// Expands a plan into seeded run specs plus human-readable warnings.
pub fn expand(plan: &ExperimentPlan) -> Result<(Vec<RunSpec>, Vec<String>), PlanError> {
    if plan.n_runs < 2 {
        return Err(PlanError::TooFewRuns(plan.n_runs));
    }
    if plan.controllers.is_empty() {
        return Err(PlanError::NoControllers);
    }
    if plan.swarm_sizes.is_empty() || plan.swarm_sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PlanError::BadSizeLadder);
    }
    if wants(plan, MetricKind::SpatialSelforg) && !plan.swarm_sizes.contains(&1) {
        return Err(PlanError::MissingUnitSize);
    }
    plan.scenario.resolved()?;

    let mut warnings = Vec::new();
    let combos = settings_combinations(&plan.sweeps, &mut warnings);

    let mut specs: Vec<RunSpec> = Vec::new();
    let mut seen_cells: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    let push_cell = |specs: &mut Vec<RunSpec>,
                         seen: &mut std::collections::BTreeSet<String>,
                         controller: &Controller,
                         size: u32,
                         settings: &[Setting]|
     -> Result<(), PlanError> {
        let label = cell_label(controller, size, settings);
        if !seen.insert(label.clone()) {
            return Ok(());
        }
        let perturbations = build_perturbations(plan, settings, size)?;
        for run_idx in 0..plan.n_runs {
            let seed = cell_seed(plan.base_seed, controller, size, settings, run_idx);
            let mut config = plan.scenario.clone();
            config.n_robots = size;
            config.seed = seed;
            if let Some(Setting::PRw(p)) =
                settings.iter().find(|s| matches!(s, Setting::PRw(_))).copied()
            {
                config.p_rw = p;
            }
            specs.push(RunSpec {
                label: label.clone(),
                controller: *controller,
                swarm_size: size,
                settings: settings.to_vec(),
                run_idx,
                seed,
                config,
                perturbations: perturbations.clone(),
            });
        }
        Ok(())
    };

    for controller in &plan.controllers {
        for &size in &plan.swarm_sizes {
            for settings in &combos {
                push_cell(&mut specs, &mut seen_cells, controller, size, settings)?;
            }
            // Ideal-condition baselines for every cell that needs one.
            for settings in &combos {
                if baseline_needed(plan, settings) {
                    let ideal: Vec<Setting> = settings.iter().map(Setting::idealized).collect();
                    push_cell(&mut specs, &mut seen_cells, controller, size, &ideal)?;
                }
            }
        }
    }
    Ok((specs, warnings))
}

/// Runs every spec on a thread pool with `workers` threads (0 = one per
/// core). Individual failures (including panics) are recorded per spec,
/// never propagated; results are ordered like the specs regardless of
/// parallelism.
pub fn execute(specs: &[RunSpec], workers: usize) -> Vec<Result<CurveBundle, String>> {
    execute_with(specs, workers, |_| {})
}

/// [`execute`] with a completion callback, called once per finished run
/// with the number of runs done so far.
pub fn execute_with(
    specs: &[RunSpec],
    workers: usize,
    on_done: impl Fn(usize) + Sync,
) -> Vec<Result<CurveBundle, String>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool construction cannot fail with these settings");
    let done = std::sync::atomic::AtomicUsize::new(0);
    pool.install(|| {
        specs
            .par_iter()
            .map(|spec| {
                let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
                    sim::run(&spec.config, spec.controller, spec.perturbations.clone())
                }))
                .map_err(|panic| {
                    let msg = panic
                        .downcast_ref::<&str>()
                        .map(|s| s.to_string())
                        .or_else(|| panic.downcast_ref::<String>().cloned())
                        .unwrap_or_else(|| "panic".to_string());
                    format!("run panicked: {msg}")
                })
                .and_then(|r| r.map_err(|e| e.to_string()));
                on_done(done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1);
                result
            })
            .collect()
    })
}

/// One report row: a metric value for one cell (or size pair).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub metric: String,
    pub controller: String,
    pub n1: u32,
    /// Pair partner for size-pair metrics, 0 otherwise.
    pub n2: u32,
    pub axis: String,
    pub x: f64,
    pub value: Option<f64>,
    pub ci95: Option<f64>,
    pub n_runs: u32,
    pub status: String,
    pub note: String,
}

/// The computed metric suite plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
    pub plan_hash: u64,
    /// Per-spec (label, run index, seed) provenance.
    pub seeds: Vec<(String, u32, u64)>,
    /// Failed runs as `label#run: error`.
    pub failures: Vec<String>,
}

pub const REPORT_CSV_HEADER: &str = "metric,controller,n1,n2,axis,x,value,ci95,n_runs,status,note";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl MetricReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# plan_hash={:016x}\n", self.plan_hash));
        out.push_str(REPORT_CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                row.metric,
                row.controller,
                row.n1,
                row.n2,
                row.axis,
                row.x,
                fmt_opt(row.value),
                fmt_opt(row.ci95),
                row.n_runs,
                row.status,
                row.note,
            ));
        }
        out
    }

    /// Plot-ready CSV per metric: X = sweep value, Y = metric, CI column.
    pub fn per_metric_csv(&self) -> Vec<(String, String)> {
        let mut metrics: Vec<String> = self.rows.iter().map(|r| r.metric.clone()).collect();
        metrics.sort();
        metrics.dedup();
        metrics
            .into_iter()
            .map(|metric| {
                let mut csv = String::from("controller,n1,n2,axis,x,y,ci95,note\n");
                for row in self.rows.iter().filter(|r| r.metric == metric && r.status == "ok") {
                    csv.push_str(&format!(
                        "{},{},{},{},{},{},{},{}\n",
                        row.controller,
                        row.n1,
                        row.n2,
                        row.axis,
                        row.x,
                        fmt_opt(row.value),
                        fmt_opt(row.ci95),
                        row.note,
                    ));
                }
                (metric, csv)
            })
            .collect()
    }

    /// Stable content hash of the rendered report.
    pub fn content_hash(&self) -> u64 {
        mix_bytes(0x5245_504f_5254, self.to_csv().as_bytes())
    }

    /// Merges reports from disjoint sub-plans; duplicate rows (shared
    /// baseline cells) collapse, and row order is re-canonicalized.
    pub fn merge(mut self, other: MetricReport) -> MetricReport {
        self.rows.extend(other.rows);
        sort_rows(&mut self.rows);
        self.rows.dedup();
        self.seeds.extend(other.seeds);
        self.seeds.sort();
        self.seeds.dedup();
        self.failures.extend(other.failures);
        self.failures.sort();
        self.failures.dedup();
        self.plan_hash ^= other.plan_hash;
        self
    }
}

fn sort_rows(rows: &mut [MetricRow]) {
    rows.sort_by(|a, b| {
        (&a.metric, &a.controller, &a.axis)
            .cmp(&(&b.metric, &b.controller, &b.axis))
            .then(a.x.total_cmp(&b.x))
            .then(a.n1.cmp(&b.n1))
            .then(a.n2.cmp(&b.n2))
            .then(a.note.cmp(&b.note))
    });
}

/// Stable hash of the plan contents.
pub fn plan_hash(plan: &ExperimentPlan) -> u64 {
    mix_bytes(0x504c_414e, format!("{plan:?}").as_bytes())
}

struct Cell<'a> {
    controller: String,
    size: u32,
    settings: Vec<Setting>,
    /// Bundles by run index; None where the run failed.
    runs: Vec<Option<&'a CurveBundle>>,
}

impl<'a> Cell<'a> {
    fn setting(&self, axis: &str) -> Option<&Setting> {
        self.settings.iter().find(|s| s.axis() == axis)
    }

    fn sweep_x(&self) -> (String, f64) {
        // The last non-scenario axis present, else p_rw, else none.
        for s in self.settings.iter().rev() {
            if !matches!(s, Setting::PRw(_)) {
                return (s.axis().to_string(), s.x());
            }
        }
        if let Some(s) = self.settings.first() {
            return (s.axis().to_string(), s.x());
        }
        (String::new(), 0.0)
    }

    fn is_ideal(&self) -> bool {
        self.settings.iter().all(|s| match s {
            Setting::NoiseSigma(v) => *v == 0.0,
            Setting::ThrottleAmplitude(a, _) => *a == 0.0,
            Setting::PopulationRates(r) => r.is_zero(),
            Setting::PRw(_) => true,
        })
    }

    fn ideal_label(&self, controller: &Controller) -> String {
        let ideal: Vec<Setting> = self.settings.iter().map(Setting::idealized).collect();
        cell_label(controller, self.size, &ideal)
    }
}

fn group_cells<'a>(
    specs: &'a [RunSpec],
    results: &'a [Result<CurveBundle, String>],
    n_runs: u32,
) -> std::collections::BTreeMap<String, Cell<'a>> {
    let mut cells: std::collections::BTreeMap<String, Cell<'a>> = Default::default();
    for (spec, result) in specs.iter().zip(results) {
        let cell = cells.entry(spec.label.clone()).or_insert_with(|| Cell {
            controller: spec.controller.id().to_string(),
            size: spec.swarm_size,
            settings: spec.settings.clone(),
            runs: vec![None; n_runs as usize],
        });
        if let Ok(bundle) = result {
            cell.runs[spec.run_idx as usize] = Some(bundle);
        }
    }
    cells
}

/// Paired samples across run indices where both cells succeeded.
fn paired<'a>(
    a: &'a Cell<'_>,
    b: &'a Cell<'_>,
) -> impl Iterator<Item = (&'a CurveBundle, &'a CurveBundle)> {
    a.runs
        .iter()
        .zip(&b.runs)
        .filter_map(|(x, y)| Some((x.as_ref()?, y.as_ref()?)))
        .map(|(x, y)| (*x, *y))
}

fn summarize(metric: &str, base: MetricRow, samples: &[f64]) -> MetricRow {
    if samples.is_empty() {
        return MetricRow {
            metric: metric.into(),
            value: None,
            ci95: None,
            n_runs: 0,
            status: "failed".into(),
            note: "no successful run pairs".into(),
            ..base
        };
    }
    let (mean, hw) = mean_ci(samples);
    MetricRow {
        metric: metric.into(),
        value: Some(mean),
        ci95: Some(hw),
        n_runs: samples.len() as u32,
        status: "ok".into(),
        ..base
    }
}

fn blank_row(cell: &Cell<'_>) -> MetricRow {
    let (axis, x) = cell.sweep_x();
    MetricRow {
        metric: String::new(),
        controller: cell.controller.clone(),
        n1: cell.size,
        n2: 0,
        axis,
        x,
        value: None,
        ci95: None,
        n_runs: 0,
        status: "ok".into(),
        note: String::new(),
    }
}

fn inapplicable(metric: MetricKind, note: &str) -> MetricRow {
    MetricRow {
        metric: metric.name().into(),
        controller: "*".into(),
        n1: 0,
        n2: 0,
        axis: String::new(),
        x: 0.0,
        value: None,
        ci95: None,
        n_runs: 0,
        status: "inapplicable".into(),
        note: note.into(),
    }
}

/// Computes every requested metric from executed runs.
///
/// DTW-family metrics pair the i-th run of a perturbed cell with the
/// i-th run of its ideal baseline cell; size-pair metrics pair the i-th
/// runs of adjacent non-unit sizes under identical settings. Metrics a
/// plan requests but no cell supports appear as `inapplicable` rows with
/// a reason.
pub fn compute_suite(
    plan: &ExperimentPlan,
    specs: &[RunSpec],
    results: &[Result<CurveBundle, String>],
) -> MetricReport {
    let cells = group_cells(specs, results, plan.n_runs);
    let mut rows: Vec<MetricRow> = Vec::new();
    let dtw_cfg = DtwConfig::default();

    // DTW-family and availability metrics, per cell.
    for cell in cells.values() {
        let controller = plan
            .controllers
            .iter()
            .find(|c| c.id() == cell.controller)
            .copied()
            .expect("cell controller comes from the plan");
        let baseline_label = cell.ideal_label(&controller);
        let baseline = cells.get(&baseline_label);

        if wants(plan, MetricKind::SaRobustness) && cell.setting("noise_sigma").is_some() {
            if let Some(base) = baseline {
                let samples: Vec<f64> = paired(base, cell)
                    .filter_map(|(b, c)| {
                        sa_robustness(&b.performance, &c.performance, &dtw_cfg).ok()
                    })
                    .collect();
                rows.push(summarize("sa_robustness", blank_row(cell), &samples));
            }
        }

        if let Some(Setting::ThrottleAmplitude(amplitude, wf)) =
            cell.setting("throttle_amplitude").copied()
        {
            let profile = VarianceProfile::new(wf.kind, amplitude, wf.period, wf.target)
                .map(|mut p| {
                    p.phase = wf.phase;
                    p
                });
            if let (Some(base), Ok(profile)) = (baseline, profile) {
                if wants(plan, MetricKind::Reactivity) {
                    let samples: Vec<f64> = paired(base, cell)
                        .filter_map(|(b, c)| {
                            let input =
                                FlexibilityInput::new(&b.performance, &c.performance, &profile)
                                    .ok()?
                                    .with_convention(ReactivityConvention::ProportionalSlowdown);
                            reactivity(&input).ok()
                        })
                        .collect();
                    rows.push(summarize("reactivity", blank_row(cell), &samples));
                }
                if wants(plan, MetricKind::Adaptability) {
                    let samples: Vec<f64> = paired(base, cell)
                        .filter_map(|(b, c)| {
                            let input =
                                FlexibilityInput::new(&b.performance, &c.performance, &profile)
                                    .ok()?;
                            adaptability(&input).ok()
                        })
                        .collect();
                    rows.push(summarize("adaptability", blank_row(cell), &samples));
                }
            }
        }

        if let Some(Setting::PopulationRates(rates)) = cell.setting("population_rates").copied() {
            if wants(plan, MetricKind::PdRobustness) {
                if let Some(base) = baseline {
                    let mut failure: Option<String> = None;
                    let samples: Vec<f64> = paired(base, cell)
                        .filter_map(|(b, c)| {
                            let input = RobustnessInput {
                                perf_ideal: &b.performance,
                                perf_actual: &c.performance,
                                rates,
                                rates_ideal: QueueRates::default(),
                                total_time: plan.scenario.duration as f64,
                            };
                            pd_robustness(&input)
                                .map_err(|e| failure = Some(e.to_string()))
                                .ok()
                        })
                        .collect();
                    let mut row = summarize("pd_robustness", blank_row(cell), &samples);
                    if samples.is_empty() {
                        if let Some(reason) = failure {
                            row.status = "inapplicable".into();
                            row.note = reason;
                        }
                    }
                    rows.push(row);
                }
            }
            if wants(plan, MetricKind::Availability) && !cell.is_ideal() {
                rows.extend(availability_rows(plan, cell, &rates));
            }
        }
    }

    // Size-pair metrics, per settings group.
    let pair_metrics = [MetricKind::SpatialSelforg, MetricKind::TaskSelforg, MetricKind::Scalability];
    if pair_metrics.iter().any(|m| wants(plan, *m)) {
        rows.extend(size_pair_rows(plan, &cells));
    }

    // Requested metrics that produced no rows at all get a reason.
    for metric in &plan.metrics {
        if !rows.iter().any(|r| r.metric == metric.name()) {
            let note = match metric {
                MetricKind::SaRobustness => "no noise_sigma axis in the plan",
                MetricKind::Reactivity | MetricKind::Adaptability => {
                    "no throttle_amplitude axis in the plan"
                }
                MetricKind::PdRobustness | MetricKind::Availability => {
                    "no population_rates axis in the plan"
                }
                MetricKind::SpatialSelforg | MetricKind::TaskSelforg | MetricKind::Scalability => {
                    "size ladder offers no adjacent non-unit pair"
                }
            };
            rows.push(inapplicable(*metric, note));
        }
    }

    sort_rows(&mut rows);

    let mut seeds: Vec<(String, u32, u64)> =
        specs.iter().map(|s| (s.label.clone(), s.run_idx, s.seed)).collect();
    seeds.sort();
    let mut failures: Vec<String> = specs
        .iter()
        .zip(results)
        .filter_map(|(spec, result)| {
            result
                .as_ref()
                .err()
                .map(|e| format!("{}#{}: {}", spec.label, spec.run_idx, e))
        })
        .collect();
    failures.sort();

    MetricReport { rows, plan_hash: plan_hash(plan), seeds, failures }
}

fn availability_rows(plan: &ExperimentPlan, cell: &Cell<'_>, rates: &QueueRates) -> Vec<MetricRow> {
    let mut rows = Vec::new();
    let n = cell.size;
    let n_mins: Vec<u32> = if plan.availability_n_min.is_empty() {
        let mut qs: Vec<u32> =
            [n / 4, n / 2, 3 * n / 4].iter().map(|&q| q.max(1).min(n)).collect();
        qs.sort_unstable();
        qs.dedup();
        qs
    } else {
        plan.availability_n_min.iter().copied().filter(|&m| m >= 1 && m <= n).collect()
    };
    let rho = match utilization(rates) {
        Ok(rho) => rho,
        Err(e) => {
            let mut row = blank_row(cell);
            row.metric = "availability".into();
            row.status = "inapplicable".into();
            row.note = e.to_string();
            return vec![row];
        }
    };
    for n_min in n_mins {
        let mut row = blank_row(cell);
        row.metric = "availability".into();
        row.note = format!("n_min={n_min}");
        match availability(rho, n, n_min) {
            Ok(p) => {
                row.value = Some(p);
                row.ci95 = Some(0.0);
            }
            Err(e) => {
                row.status = "inapplicable".into();
                row.note = format!("n_min={n_min}: {e}");
            }
        }
        rows.push(row);
    }
    rows
}

fn size_pair_rows(
    plan: &ExperimentPlan,
    cells: &std::collections::BTreeMap<String, Cell<'_>>,
) -> Vec<MetricRow> {
    let mut rows = Vec::new();
    let non_unit: Vec<u32> = plan.swarm_sizes.iter().copied().filter(|&s| s > 1).collect();

    // Group cells by (controller, settings label) so pairs compare like
    // with like.
    let mut groups: std::collections::BTreeMap<(String, String), Vec<&Cell<'_>>> =
        Default::default();
    for cell in cells.values() {
        let settings_label: String = cell
            .settings
            .iter()
            .map(|s| s.label())
            .collect::<Vec<_>>()
            .join("/");
        groups
            .entry((cell.controller.clone(), settings_label))
            .or_default()
            .push(cell);
    }

    for ((_, _), group) in groups.iter() {
        let by_size = |size: u32| group.iter().find(|c| c.size == size);
        for pair in non_unit.windows(2) {
            let (n1, n2) = (pair[0], pair[1]);
            let (Some(low), Some(high)) = (by_size(n1), by_size(n2)) else { continue };

            let mut base = blank_row(low);
            base.n2 = n2;

            if wants(plan, MetricKind::TaskSelforg) {
                let samples: Vec<f64> = paired(low, high)
                    .filter_map(|(l, h)| task_selforg(&l.performance, &h.performance).ok())
                    .collect();
                rows.push(summarize("task_selforg", base.clone(), &samples));
            }
            if wants(plan, MetricKind::Scalability) {
                let samples: Vec<f64> = paired(low, high)
                    .filter_map(|(l, h)| {
                        let input = ScalabilityInput::new(&l.performance, &h.performance).ok()?;
                        karp_flatt_scalability(&input).ok()
                    })
                    .collect();
                rows.push(summarize("scalability", base.clone(), &samples));
            }
            if wants(plan, MetricKind::SpatialSelforg) {
                if let Some(unit) = by_size(1) {
                    let samples: Vec<f64> = low
                        .runs
                        .iter()
                        .zip(&high.runs)
                        .zip(&unit.runs)
                        .filter_map(|((l, h), u)| {
                            let (l, h, u) = (l.as_ref()?, h.as_ref()?, u.as_ref()?);
                            let baseline =
                                MeasuredPair::new(&u.performance, &u.interference).ok()?;
                            let low_pair =
                                MeasuredPair::new(&l.performance, &l.interference).ok()?;
                            let high_pair =
                                MeasuredPair::new(&h.performance, &h.interference).ok()?;
                            let input = SelfOrgInput::new(baseline, low_pair, high_pair).ok()?;
                            spatial_selforg(&input).ok()
                        })
                        .collect();
                    rows.push(summarize("spatial_selforg", base.clone(), &samples));
                }
            }
        }
    }
    rows
}
