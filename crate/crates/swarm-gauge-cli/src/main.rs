//! `swarm-gauge`: run foraging simulations, compute swarm performance
//! metrics from curve files, tabulate availability, and drive full
//! parameter sweeps.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use swarm_gauge::curves::{read_curves, CurveBundle};
use swarm_gauge::dtw::DtwConfig;
use swarm_gauge::experiment::{self, MetricReport};
use swarm_gauge::flexibility::{
    adaptability, reactivity, FlexibilityInput, ThrottleTarget, VarianceProfile, WaveformKind,
};
use swarm_gauge::robustness::{
    availability, pd_robustness, sa_robustness, utilization, QueueRates, RobustnessInput,
};
use swarm_gauge::scalability::{karp_flatt_scalability, ScalabilityInput};
use swarm_gauge::selforg::{spatial_selforg, task_selforg, MeasuredPair, SelfOrgInput};
use swarm_gauge::sim;
use swarm_gauge::util::write_atomic;

use config::ConfigFile;

/// Environment variable holding the default sweep worker count.
const WORKERS_ENV: &str = "SWARM_GAUGE_WORKERS";

#[derive(Parser)]
#[command(name = "swarm-gauge", version, about = "Swarm performance metrics and foraging simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its curve bundle CSV.
    Sim(SimArgs),
    /// Compute metrics from existing curve files (no simulation).
    Metrics(MetricsArgs),
    /// Tabulate swarm availability over a range of minimum team sizes.
    Availability(AvailabilityArgs),
    /// Expand, execute and analyze a full sweep plan.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SimArgs {
    /// TOML config with scenario and controllers sections.
    #[arg(long)]
    config: PathBuf,
    /// Output curve CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the swarm size.
    #[arg(long)]
    n: Option<u32>,
    /// Pick a controller from the config by id (default: first).
    #[arg(long)]
    controller: Option<String>,
    /// Also write a per-step trace CSV (timestep, robot, x, y, mode).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Metric to compute; repeatable. One of: adaptability, reactivity,
    /// sa-robustness, pd-robustness, scalability, task-selforg,
    /// spatial-selforg.
    #[arg(long = "metric", required = true)]
    metrics: Vec<String>,
    /// Ideal-conditions curve file (DTW-family metrics).
    #[arg(long)]
    ideal: Option<PathBuf>,
    /// Measured curve file under perturbation (DTW-family metrics).
    #[arg(long)]
    actual: Option<PathBuf>,
    /// Smaller-swarm curve file (size-pair metrics).
    #[arg(long)]
    low: Option<PathBuf>,
    /// Larger-swarm curve file (size-pair metrics).
    #[arg(long)]
    high: Option<PathBuf>,
    /// Single-robot baseline curve file (spatial-selforg).
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Deviation waveform for reactivity: constant, square or sine.
    #[arg(long, default_value = "constant")]
    waveform: String,
    #[arg(long, default_value_t = 0.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 5000)]
    period: u64,
    #[arg(long, default_value_t = 0.0)]
    phase: f64,
    /// Queue rates for pd-robustness.
    #[arg(long, default_value_t = 0.0)]
    lambda_d: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda_bd: f64,
    #[arg(long, default_value_t = 0.0)]
    mu_b: f64,
    #[arg(long, default_value_t = 0.0)]
    mu_bd: f64,
    /// Run length in timesteps for pd-robustness (default: inferred
    /// from the curve).
    #[arg(long)]
    total_time: Option<f64>,
    /// Optional CSV output (metric,value rows).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AvailabilityArgs {
    /// Queue utilization directly; alternative to the four rates.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    lambda_d: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda_bd: f64,
    #[arg(long, default_value_t = 0.0)]
    mu_b: f64,
    #[arg(long, default_value_t = 0.0)]
    mu_bd: f64,
    /// Swarm size N.
    #[arg(long)]
    swarm_size: u32,
    /// Smallest minimum team size to tabulate (default 1).
    #[arg(long)]
    min_from: Option<u32>,
    /// Largest minimum team size to tabulate (default N).
    #[arg(long)]
    min_to: Option<u32>,
    /// Optional CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML plan (scenario, controllers, sweeps, metrics, output).
    #[arg(long)]
    plan: PathBuf,
    /// Output directory (overrides the plan's output.dir).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads; 0 means one per core. Overrides the
    /// SWARM_GAUGE_WORKERS environment variable and the plan.
    #[arg(long)]
    workers: Option<usize>,
}

enum CliError {
    /// Bad invocation or config: exit 2.
    Usage(String),
    /// A run or write failed: exit 1.
    Runtime(String),
}

impl CliError {
    fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Sim(args) => cmd_sim(args),
        Command::Metrics(args) => cmd_metrics(args),
        Command::Availability(args) => cmd_availability(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    ConfigFile::parse(&text)
        .map_err(|e| CliError::Usage(format!("{} is not a valid config: {e}", path.display())))
}

fn load_bundle(path: &Path) -> Result<CurveBundle, CliError> {
    read_curves(path).map_err(CliError::usage)
}

fn cmd_sim(args: SimArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    let controller = cfg.controller(args.controller.as_deref()).map_err(CliError::Usage)?;
    let mut scenario = cfg.scenario.clone();
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(n) = args.n {
        scenario.n_robots = n;
    }
    scenario.resolved().map_err(CliError::usage)?;
    let perturbations = cfg.perturbations.clone().unwrap_or_default();

    let (bundle, trace) =
        sim::run_traced(&scenario, controller, perturbations, args.trace.is_some())
            .map_err(CliError::runtime)?;
    swarm_gauge::curves::write_curves(&bundle, &args.out).map_err(CliError::runtime)?;
    if let Some(trace_path) = args.trace {
        let mut text = String::from("timestep,robot,x,y,mode\n");
        for row in &trace {
            text.push_str(&format!("{},{},{},{},{}\n", row.t, row.robot, row.x, row.y, row.mode));
        }
        write_atomic(&trace_path, text.as_bytes()).map_err(CliError::runtime)?;
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn build_profile(args: &MetricsArgs) -> Result<VarianceProfile, CliError> {
    let kind = match args.waveform.as_str() {
        "constant" => WaveformKind::Constant,
        "square" => WaveformKind::Square,
        "sine" => WaveformKind::Sine,
        other => return Err(CliError::Usage(format!("unknown waveform {other:?}"))),
    };
    let mut profile = VarianceProfile::new(kind, args.amplitude, args.period, ThrottleTarget::CarrySpeed)
        .map_err(CliError::usage)?;
    profile.phase = args.phase;
    Ok(profile)
}

fn cmd_metrics(args: MetricsArgs) -> Result<(), CliError> {
    let need = |opt: &Option<PathBuf>, flag: &str, metric: &str| -> Result<PathBuf, CliError> {
        opt.clone()
            .ok_or_else(|| CliError::Usage(format!("{metric} requires --{flag}")))
    };
    let dtw_cfg = DtwConfig::default();
    let mut lines = Vec::new();

    for metric in &args.metrics {
        let value = match metric.as_str() {
            "adaptability" | "reactivity" | "sa-robustness" | "pd-robustness" => {
                let ideal = load_bundle(&need(&args.ideal, "ideal", metric)?)?;
                let actual = load_bundle(&need(&args.actual, "actual", metric)?)?;
                match metric.as_str() {
                    "sa-robustness" => {
                        sa_robustness(&ideal.performance, &actual.performance, &dtw_cfg)
                            .map_err(CliError::usage)?
                    }
                    "pd-robustness" => {
                        let rates = QueueRates {
                            lambda_d: args.lambda_d,
                            lambda_bd: args.lambda_bd,
                            mu_b: args.mu_b,
                            mu_bd: args.mu_bd,
                        };
                        let total_time = args.total_time.unwrap_or_else(|| {
                            (actual.len() as u32 * actual.performance.interval_len()) as f64
                        });
                        pd_robustness(&RobustnessInput {
                            perf_ideal: &ideal.performance,
                            perf_actual: &actual.performance,
                            rates,
                            rates_ideal: QueueRates::default(),
                            total_time,
                        })
                        .map_err(CliError::usage)?
                    }
                    "reactivity" => {
                        let profile = build_profile(&args)?;
                        let input =
                            FlexibilityInput::new(&ideal.performance, &actual.performance, &profile)
                                .map_err(CliError::usage)?;
                        reactivity(&input).map_err(CliError::usage)?
                    }
                    _ => {
                        let profile = build_profile(&args)?;
                        let input =
                            FlexibilityInput::new(&ideal.performance, &actual.performance, &profile)
                                .map_err(CliError::usage)?;
                        adaptability(&input).map_err(CliError::usage)?
                    }
                }
            }
            "scalability" | "task-selforg" | "spatial-selforg" => {
                let low = load_bundle(&need(&args.low, "low", metric)?)?;
                let high = load_bundle(&need(&args.high, "high", metric)?)?;
                match metric.as_str() {
                    "scalability" => {
                        let input = ScalabilityInput::new(&low.performance, &high.performance)
                            .map_err(CliError::usage)?;
                        karp_flatt_scalability(&input).map_err(CliError::usage)?
                    }
                    "task-selforg" => task_selforg(&low.performance, &high.performance)
                        .map_err(CliError::usage)?,
                    _ => {
                        let base = load_bundle(&need(&args.baseline, "baseline", metric)?)?;
                        let input = SelfOrgInput::new(
                            MeasuredPair::new(&base.performance, &base.interference)
                                .map_err(CliError::usage)?,
                            MeasuredPair::new(&low.performance, &low.interference)
                                .map_err(CliError::usage)?,
                            MeasuredPair::new(&high.performance, &high.interference)
                                .map_err(CliError::usage)?,
                        )
                        .map_err(CliError::usage)?;
                        spatial_selforg(&input).map_err(CliError::usage)?
                    }
                }
            }
            other => {
                return Err(CliError::Usage(format!(
                    "unknown metric {other:?}; see --help for the list"
                )))
            }
        };
        println!("{metric} = {value}");
        lines.push(format!("{metric},{value}"));
    }

    if let Some(out) = args.out {
        let text = format!("metric,value\n{}\n", lines.join("\n"));
        write_atomic(&out, text.as_bytes()).map_err(CliError::runtime)?;
    }
    Ok(())
}

fn cmd_availability(args: AvailabilityArgs) -> Result<(), CliError> {
    let rho = match args.rho {
        Some(rho) => rho,
        None => {
            let rates = QueueRates {
                lambda_d: args.lambda_d,
                lambda_bd: args.lambda_bd,
                mu_b: args.mu_b,
                mu_bd: args.mu_bd,
            };
            utilization(&rates).map_err(CliError::usage)?
        }
    };
    if !(rho > 0.0 && rho < 1.0) {
        return Err(CliError::Usage(format!(
            "unstable or degenerate queue: utilization {rho} must lie in (0, 1)"
        )));
    }
    let n = args.swarm_size;
    let from = args.min_from.unwrap_or(1).max(1);
    let to = args.min_to.unwrap_or(n).min(n);
    if from > to {
        return Err(CliError::Usage(format!("empty n_min range {from}..{to}")));
    }

    let mut text = String::from("n_min,p_v\n");
    println!("rho = {rho}, N = {n}");
    println!("n_min,p_v");
    for n_min in from..=to {
        let p = availability(rho, n, n_min).map_err(CliError::usage)?;
        println!("{n_min},{p}");
        text.push_str(&format!("{n_min},{p}\n"));
    }
    if let Some(out) = args.out {
        write_atomic(&out, text.as_bytes()).map_err(CliError::runtime)?;
    }
    Ok(())
}

fn sanitize_label(label: &str) -> String {
    label
        .chars()
        .map(|c| match c {
            '/' => '_',
            c if c.is_ascii_alphanumeric() || ".-=_".contains(c) => c,
            _ => '-',
        })
        .collect()
}

fn resolve_workers(args: &SweepArgs, cfg: &ConfigFile) -> Result<usize, CliError> {
    if let Some(w) = args.workers {
        return Ok(w);
    }
    if let Ok(value) = std::env::var(WORKERS_ENV) {
        return value
            .parse()
            .map_err(|_| CliError::Usage(format!("{WORKERS_ENV}={value:?} is not a number")));
    }
    Ok(cfg.output.workers.unwrap_or(0))
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.plan)?;
    if cfg.metrics.requested.is_empty() {
        return Err(CliError::Usage(
            "the plan requests no metrics ([metrics] requested = [...])".into(),
        ));
    }
    let plan = cfg.to_plan();
    let workers = resolve_workers(&args, &cfg)?;
    let out_dir = args
        .out_dir
        .or_else(|| cfg.output.dir.clone())
        .ok_or_else(|| CliError::Usage("no output directory (--out-dir or [output] dir)".into()))?;

    let (specs, warnings) = experiment::expand(&plan).map_err(CliError::usage)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("executing {} runs on {} workers", specs.len(), if workers == 0 { num_threads() } else { workers });
    let total = specs.len();
    let results = experiment::execute_with(&specs, workers, |done| {
        eprint!("\r{done}/{total} runs");
    });
    eprintln!();
    let report = experiment::compute_suite(&plan, &specs, &results);

    write_outputs(&out_dir, &cfg, &specs, &results, &report, &warnings, workers)?;
    println!(
        "report: {} rows, {} failed runs, plan hash {:016x}",
        report.rows.len(),
        report.failures.len(),
        report.plan_hash
    );
    println!("wrote {}", out_dir.join("report.csv").display());
    Ok(())
}

fn num_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[allow(clippy::too_many_arguments)]
fn write_outputs(
    out_dir: &Path,
    cfg: &ConfigFile,
    specs: &[experiment::RunSpec],
    results: &[Result<CurveBundle, String>],
    report: &MetricReport,
    warnings: &[String],
    workers: usize,
) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir.join("metrics")).map_err(CliError::runtime)?;
    std::fs::create_dir_all(out_dir.join("bundles")).map_err(CliError::runtime)?;

    write_atomic(&out_dir.join("report.csv"), report.to_csv().as_bytes())
        .map_err(CliError::runtime)?;

    for (metric, csv) in report.per_metric_csv() {
        write_atomic(&out_dir.join("metrics").join(format!("{metric}.csv")), csv.as_bytes())
            .map_err(CliError::runtime)?;
    }

    for (spec, result) in specs.iter().zip(results) {
        if let Ok(bundle) = result {
            let name = format!("{}__run{}.csv", sanitize_label(&spec.label), spec.run_idx);
            swarm_gauge::curves::write_curves(bundle, out_dir.join("bundles").join(name))
                .map_err(CliError::runtime)?;
        }
    }

    let manifest = Manifest {
        plan_hash: format!("{:016x}", report.plan_hash),
        workers,
        warnings: warnings.to_vec(),
        failures: report.failures.clone(),
        config: cfg.clone(),
        seeds: report
            .seeds
            .iter()
            .map(|(label, run, seed)| SeedRow { cell: label.clone(), run: *run, seed: *seed })
            .collect(),
    };
    let text = toml::to_string(&manifest)
        .map_err(|e| CliError::Runtime(format!("manifest serialization failed: {e}")))?;
    write_atomic(&out_dir.join("manifest.toml"), text.as_bytes()).map_err(CliError::runtime)?;
    Ok(())
}

#[derive(serde::Serialize)]
struct Manifest {
    plan_hash: String,
    workers: usize,
    warnings: Vec<String>,
    failures: Vec<String>,
    /// The effective configuration, echoed for provenance.
    config: ConfigFile,
    seeds: Vec<SeedRow>,
}

#[derive(serde::Serialize)]
struct SeedRow {
    cell: String,
    run: u32,
    seed: u64,
}
