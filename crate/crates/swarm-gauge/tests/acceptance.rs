//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! Numbered criteria cover metric null cases, the DTW oracle, queueing
//! agreement, directional simulator reproductions, and perturbation
//! stream isolation. Criterion 4 (process-level byte determinism) lives
//! in the CLI crate's acceptance suite, next to the binary it drives.

mod common;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use swarm_gauge::curves::{format_curves, InterferenceCurve, PerformanceCurve};
use swarm_gauge::dtw::{dtw_distance, DtwConfig};
use swarm_gauge::experiment::{
    self, ExperimentPlan, MetricKind, SweepAxis, ThrottleWaveform,
};
use swarm_gauge::flexibility::{
    ideal_reactivity_curve, reactivity, FlexibilityInput, ReactivityConvention, ThrottleTarget,
    VarianceProfile, WaveformKind,
};
use swarm_gauge::robustness::{
    availability, montecarlo, pd_robustness, queue_length, sa_robustness, stationary_occupancy,
    time_not_tasked, utilization, QueueRates, RobustnessInput,
};
use swarm_gauge::scalability::{serial_fraction, SerialFractionForm};
use swarm_gauge::selforg::spatial_from_losses;
use swarm_gauge::sim::controller::{Controller, CrwParams, DpoParams};
use swarm_gauge::sim::perturb::{NoiseProfile, PopulationProfile};
use swarm_gauge::sim::{self, Perturbations, Rect, WorldConfig};

const TOL: f64 = 1e-9;

fn perf(values: Vec<f64>, n: u32, tag: &str) -> PerformanceCurve {
    PerformanceCurve::new(values, 1000, n, "crw", tag).unwrap()
}

#[test]
fn criterion_1_metric_null_cases() {
    // Spatial self-organization under exactly linear loss scaling.
    let lost_low = vec![0.75, 1.5, 0.25, 2.0];
    let lost_high: Vec<f64> = lost_low.iter().map(|v| 4.0 * v).collect();
    let spatial = spatial_from_losses(&lost_low, &lost_high, 4, 16).unwrap();
    assert!(spatial.abs() < TOL, "spatial null violated: {spatial}");

    // Task self-organization under exactly linear performance scaling.
    let low = perf(vec![0.5, 1.25, 2.0], 4, "ideal");
    let high = perf(vec![2.0, 5.0, 8.0], 16, "ideal");
    let task = swarm_gauge::selforg::task_selforg(&low, &high).unwrap();
    assert!(task.abs() < TOL, "task null violated: {task}");

    // Karp-Flatt serial fraction at perfect speedup and at no speedup.
    let r = 16.0 / 4.0;
    let at_perfect = 1.0 - serial_fraction(r, r, SerialFractionForm::Standard);
    let at_flat = 1.0 - serial_fraction(1.0, r, SerialFractionForm::Standard);
    assert!((at_perfect - 1.0).abs() < TOL, "psi=r per-interval value {at_perfect}");
    assert!(at_flat.abs() < TOL, "psi=1 per-interval value {at_flat}");

    // Reactivity is zero when the actual curve tracks c_t * P_ideal.
    let ideal = perf(vec![2.0, 3.0, 2.5, 2.0], 16, "ideal");
    let profile =
        VarianceProfile::new(WaveformKind::Sine, 0.4, 2000, ThrottleTarget::CarrySpeed).unwrap();
    let reference =
        ideal_reactivity_curve(&ideal, &profile, ReactivityConvention::ProportionalSlowdown)
            .unwrap();
    let input = FlexibilityInput::new(&ideal, &reference, &profile).unwrap();
    let r_val = reactivity(&input).unwrap();
    assert!(r_val.abs() < TOL, "reactivity at its optimum: {r_val}");

    // Adaptability and noise robustness are zero on coinciding curves.
    let a_val = swarm_gauge::flexibility::adaptability(
        &FlexibilityInput::new(&ideal, &ideal, &profile).unwrap(),
    )
    .unwrap();
    let b_val = sa_robustness(&ideal, &ideal, &DtwConfig::default()).unwrap();
    assert!(a_val.abs() < TOL && b_val.abs() < TOL, "adaptability {a_val}, sa {b_val}");

    // Population-dynamics robustness under ideal rates and identical curves.
    let rates = QueueRates { lambda_bd: 0.001, mu_bd: 0.003, mu_b: 0.001, ..Default::default() };
    let pd = pd_robustness(&RobustnessInput {
        perf_ideal: &ideal,
        perf_actual: &ideal,
        rates,
        rates_ideal: rates,
        total_time: 20_000.0,
    })
    .unwrap();
    assert!(pd.abs() < TOL, "pd robustness null violated: {pd}");

    println!("[PASS] criterion 1: metric null cases within 1e-9");
}

#[test]
fn criterion_2_dtw_oracle() {
    let cfg = DtwConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xD7);

    // Exhaustive path enumeration agrees exactly on 500 short pairs.
    for case in 0..500 {
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=6);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let y: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
        let fast = dtw_distance(&x, &y, &cfg).unwrap();
        let slow = common::dtw_exhaustive(&x, &y);
        assert_eq!(fast, slow, "case {case}: dp {fast} != exhaustive {slow} for {x:?} / {y:?}");
    }

    // Identity, symmetry, non-negativity and the equal-length L1 bound
    // on 10,000 random pairs.
    for case in 0..10_000 {
        let n = rng.random_range(1..=12);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let xx = dtw_distance(&x, &x, &cfg).unwrap();
        assert_eq!(xx, 0.0, "case {case}: identity violated");
        let xy = dtw_distance(&x, &y, &cfg).unwrap();
        let yx = dtw_distance(&y, &x, &cfg).unwrap();
        assert_eq!(xy, yx, "case {case}: symmetry violated");
        assert!(xy >= 0.0, "case {case}: negative distance");
        let l1: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum();
        assert!(xy <= l1 + 1e-12, "case {case}: dtw {xy} above L1 {l1}");
    }

    println!("[PASS] criterion 2: dtw dynamic programming matches exhaustive enumeration");
}

#[test]
fn criterion_3_queueing_agreement() {
    let rates = QueueRates { lambda_bd: 0.001, mu_bd: 0.003, mu_b: 0.001, lambda_d: 0.0 };

    // Monte-Carlo of the combined queue process, 1e6 steps, fixed seed.
    let stats = montecarlo::simulate_queue_process(&rates, 1_000_000, 2).unwrap();
    let t_not_tasked = time_not_tasked(&rates).unwrap();
    let rel = (stats.mean_time_not_tasked - t_not_tasked).abs() / t_not_tasked;
    assert!(
        rel < 0.10,
        "mean time out of the tasked set {} vs closed form {t_not_tasked} ({}% off)",
        stats.mean_time_not_tasked,
        100.0 * rel
    );

    let rho = utilization(&rates).unwrap();
    let l = queue_length(rho).unwrap();
    let rel = (stats.mean_waiting - l).abs() / l;
    assert!(rel < 0.10, "mean queue length {} vs {l} ({}% off)", stats.mean_waiting, 100.0 * rel);

    // Availability: closed form vs exact stationary solve at 1e-10 ...
    let n = 8u32;
    let pi = stationary_occupancy(rho, n).unwrap();
    for n_min in 1..=n {
        let tail: f64 = pi[n_min as usize..].iter().sum();
        let closed = availability(rho, n, n_min).unwrap();
        assert!(
            (closed - tail).abs() < 1e-10,
            "closed form {closed} vs stationary solve {tail} at n_min={n_min}"
        );
    }

    // ... and vs Monte-Carlo frequency within 0.03 absolute.
    let n_min = 2u32;
    let p_closed = availability(rho, n, n_min).unwrap();
    let p_mc = montecarlo::simulate_availability(rho, n, n_min, 1_000_000, 1).unwrap();
    assert!(
        (p_mc - p_closed).abs() < 0.03,
        "availability mc {p_mc} vs closed {p_closed}"
    );

    println!("[PASS] criterion 3: queueing closed forms agree with Monte-Carlo and exact solve");
}

fn density_config(n: u32, seed: u64) -> WorldConfig {
    WorldConfig {
        arena_w: 16.0,
        arena_h: 16.0,
        nest: Rect { x: 7.0, y: 7.0, w: 2.0, h: 2.0 },
        n_robots: n,
        n_blocks: 32,
        duration: 20_000,
        interval_len: 1000,
        seed,
        ..WorldConfig::default()
    }
}

#[test]
fn criterion_5_interference_rises_with_density() {
    let mean_interference = |n: u32| -> f64 {
        let per_seed: Vec<f64> = (0..20u64)
            .into_par_iter()
            .map(|seed| {
                let cfg = density_config(n, 0x5EED + seed);
                let bundle =
                    sim::run(&cfg, Controller::Crw(CrwParams::default()), Perturbations::default())
                        .unwrap();
                let values = bundle.interference.values();
                values.iter().sum::<f64>() / values.len() as f64
            })
            .collect();
        per_seed.iter().sum::<f64>() / per_seed.len() as f64
    };
    let at_4 = mean_interference(4);
    let at_16 = mean_interference(16);
    let at_64 = mean_interference(64);
    assert!(
        at_4 <= at_16 && at_16 <= at_64,
        "interference fraction not non-decreasing: {at_4} / {at_16} / {at_64}"
    );
    println!(
        "[PASS] criterion 5: interference fraction non-decreasing over N (4: {at_4:.4}, 16: {at_16:.4}, 64: {at_64:.4})"
    );
}

fn flexibility_plan() -> ExperimentPlan {
    ExperimentPlan {
        scenario: density_config(16, 0),
        controllers: vec![Controller::Crw(CrwParams::default())],
        swarm_sizes: vec![16],
        sweeps: vec![SweepAxis::ThrottleAmplitude {
            values: vec![0.0, 0.2, 0.4],
            waveform: ThrottleWaveform {
                kind: WaveformKind::Square,
                period: 5000,
                phase: 0.0,
                target: ThrottleTarget::CarrySpeed,
            },
        }],
        n_runs: 20,
        base_seed: 0xF1E,
        metrics: vec![MetricKind::Reactivity, MetricKind::Adaptability],
        availability_n_min: vec![],
        noise_channels: None,
    }
}

fn metric_by_x(report: &experiment::MetricReport, metric: &str) -> Vec<(f64, f64)> {
    report
        .rows
        .iter()
        .filter(|r| r.metric == metric && r.status == "ok")
        .map(|r| (r.x, r.value.unwrap()))
        .collect()
}

#[test]
fn criterion_6_flexibility_rises_with_throttle_amplitude() {
    let plan = flexibility_plan();
    let (specs, _) = experiment::expand(&plan).unwrap();
    let results = experiment::execute(&specs, 0);
    let report = experiment::compute_suite(&plan, &specs, &results);

    for metric in ["reactivity", "adaptability"] {
        let series = metric_by_x(&report, metric);
        assert_eq!(series.len(), 3, "{metric} rows: {series:?}");
        for pair in series.windows(2) {
            assert!(
                pair[0].1 <= pair[1].1,
                "{metric} not non-decreasing in amplitude: {series:?}"
            );
        }
    }
    println!("[PASS] criterion 6: reactivity and adaptability non-decreasing in throttle amplitude");
}

#[test]
fn criterion_7_noise_degrades_dpo() {
    let plan = ExperimentPlan {
        scenario: density_config(16, 0),
        controllers: vec![Controller::Dpo(DpoParams::default())],
        swarm_sizes: vec![16],
        sweeps: vec![SweepAxis::NoiseSigma { values: vec![0.0, 0.02, 0.05] }],
        n_runs: 20,
        base_seed: 0xA0,
        metrics: vec![MetricKind::SaRobustness],
        availability_n_min: vec![],
        noise_channels: None,
    };
    let (specs, _) = experiment::expand(&plan).unwrap();
    let results = experiment::execute(&specs, 0);
    let report = experiment::compute_suite(&plan, &specs, &results);

    let series = metric_by_x(&report, "sa_robustness");
    assert_eq!(series.len(), 3, "sa_robustness rows: {series:?}");
    for pair in series.windows(2) {
        assert!(
            pair[0].1 <= pair[1].1,
            "sa_robustness not non-decreasing in sigma: {series:?}"
        );
    }
    println!("[PASS] criterion 7: noise robustness distance non-decreasing in sigma for DPO");
}

#[test]
fn criterion_8_pure_death_dynamics() {
    let rates = QueueRates { lambda_d: 0.0005, ..Default::default() };
    let shrank: Vec<bool> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let cfg = density_config(16, 0xDEAD + seed);
            let perturbations = Perturbations {
                population: Some(PopulationProfile::new(rates, 16, 16)),
                ..Default::default()
            };
            let bundle =
                sim::run(&cfg, Controller::Crw(CrwParams::default()), perturbations).unwrap();
            let pop = bundle.population.values();
            for w in pop.windows(2) {
                assert!(w[1] <= w[0], "tasked size grew under pure death: {pop:?}");
            }
            (*pop.last().unwrap() as u32) < 16
        })
        .collect();
    let count = shrank.iter().filter(|&&s| s).count();
    assert_eq!(count, 20, "final tasked size below initial in only {count}/20 seeds");
    println!("[PASS] criterion 8: pure death dynamics shrink the tasked population in 20/20 seeds");
}

#[test]
fn criterion_9_perturbation_stream_isolation() {
    let cfg = density_config(16, 0xBEEF);
    let controller = Controller::Crw(CrwParams::default());
    let plain = format_curves(&sim::run(&cfg, controller, Perturbations::default()).unwrap());

    let zero_noise = Perturbations {
        noise: Some(NoiseProfile::all(0.0)),
        ..Default::default()
    };
    let with_noise = format_curves(&sim::run(&cfg, controller, zero_noise).unwrap());
    assert_eq!(plain, with_noise, "sigma=0 noise shifted the run");

    let zero_population = Perturbations {
        population: Some(PopulationProfile::new(QueueRates::default(), 16, 16)),
        ..Default::default()
    };
    let with_population = format_curves(&sim::run(&cfg, controller, zero_population).unwrap());
    assert_eq!(plain, with_population, "zero-rate population dynamics shifted the run");

    println!("[PASS] criterion 9: inert perturbations reproduce the unperturbed run byte-identically");
}

// Sanity cross-check used while sizing the suite: the interference
// curves the simulator emits always pair with a valid performance curve.
#[test]
fn bundles_from_the_simulator_are_internally_consistent() {
    let cfg = density_config(8, 77);
    let bundle = sim::run(&cfg, Controller::Crw(CrwParams::default()), Perturbations::default())
        .unwrap();
    assert_eq!(bundle.performance.len(), bundle.interference.len());
    assert_eq!(bundle.performance.len(), bundle.population.len());
    let rebuilt = InterferenceCurve::new(
        bundle.interference.values().to_vec(),
        bundle.interference.interval_len(),
        bundle.interference.swarm_size(),
        bundle.interference.controller_id(),
        bundle.interference.condition_tag(),
    );
    assert!(rebuilt.is_ok());
}
