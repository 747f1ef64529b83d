//! Time-series curve model, aggregation, transforms and file I/O.
//!
//! Everything the metric kernels consume is one of three curve types,
//! each holding one value per *measurement interval* (a fixed number of
//! simulator timesteps, 1000 by default):
//!
//! * [`PerformanceCurve`] — non-negative performance per interval,
//! * [`InterferenceCurve`] — fraction of robot-time lost to inter-robot
//!   interference, in `[0, 1]`,
//! * [`PopulationCurve`] — tasked swarm size per interval.
//!
//! A [`CurveBundle`] groups the three curves produced by one run (or one
//! run-average) together with the seed that produced them.
//!
//! Curves are immutable after construction and all operations here are
//! pure functions, so they are safe to share across threads.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

/// Default number of simulator timesteps per measurement interval.
pub const DEFAULT_INTERVAL_LEN: u32 = 1000;

/// Default clamp for [`reciprocal_transform`].
pub const DEFAULT_RECIPROCAL_EPSILON: f64 = 1e-9;

/// Column header of the curve CSV format.
pub const CSV_HEADER: &str = "t,interval_len,swarm_size,controller,condition,perf,interference,tasked_size";

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("empty event stream")]
    EmptyEvents,
    #[error("curve must hold at least one value")]
    EmptyCurve,
    #[error("interval_len must be >= 1")]
    ZeroIntervalLen,
    #[error("swarm size must be >= 1")]
    ZeroSwarmSize,
    #[error("value {value} at index {index} is {problem}")]
    InvalidValue {
        index: usize,
        value: f64,
        problem: &'static str,
    },
    #[error("tasked size {value} at index {index} exceeds swarm size {max}")]
    PopulationOverflow { index: usize, value: u32, max: u32 },
    #[error("label {0:?} may not contain commas, newlines or carriage returns")]
    InvalidLabel(String),
    #[error("curves have mismatched shapes: {0}")]
    ShapeMismatch(String),
    #[error("run averaging needs at least 2 bundles, got {0}")]
    TooFewRuns(usize),
    #[error("epsilon must be > 0")]
    NonPositiveEpsilon,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

fn check_label(label: &str) -> Result<(), CurveError> {
    if label.contains(',') || label.contains('\n') || label.contains('\r') {
        Err(CurveError::InvalidLabel(label.to_string()))
    } else {
        Ok(())
    }
}

/// Per-interval performance values of one run or run-average.
///
/// Values are rates per timestep (events in the interval divided by the
/// interval length) and are non-negative by construction. Smaller-is-better
/// measures should pass through [`reciprocal_transform`] first.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceCurve {
    values: Vec<f64>,
    interval_len: u32,
    swarm_size: u32,
    controller_id: String,
    condition_tag: String,
}

impl PerformanceCurve {
    pub fn new(
        values: Vec<f64>,
        interval_len: u32,
        swarm_size: u32,
        controller_id: impl Into<String>,
        condition_tag: impl Into<String>,
    ) -> Result<Self, CurveError> {
        if values.is_empty() {
            return Err(CurveError::EmptyCurve);
        }
        if interval_len == 0 {
            return Err(CurveError::ZeroIntervalLen);
        }
        if swarm_size == 0 {
            return Err(CurveError::ZeroSwarmSize);
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(CurveError::InvalidValue { index, value, problem: "not finite" });
            }
            if value < 0.0 {
                return Err(CurveError::InvalidValue { index, value, problem: "negative" });
            }
        }
        let controller_id = controller_id.into();
        let condition_tag = condition_tag.into();
        check_label(&controller_id)?;
        check_label(&condition_tag)?;
        Ok(Self { values, interval_len, swarm_size, controller_id, condition_tag })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn interval_len(&self) -> u32 {
        self.interval_len
    }

    pub fn swarm_size(&self) -> u32 {
        self.swarm_size
    }

    pub fn controller_id(&self) -> &str {
        &self.controller_id
    }

    pub fn condition_tag(&self) -> &str {
        &self.condition_tag
    }

    /// Errors unless `other` covers the same intervals (same length and
    /// interval_len). Metrics call this before comparing curves.
    pub fn check_shape(&self, other: &PerformanceCurve) -> Result<(), CurveError> {
        check_shape(
            (self.len(), self.interval_len),
            (other.len(), other.interval_len),
        )
    }
}

fn check_shape(a: (usize, u32), b: (usize, u32)) -> Result<(), CurveError> {
    if a != b {
        return Err(CurveError::ShapeMismatch(format!(
            "{} points @ {} steps vs {} points @ {} steps",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}

/// Fraction of robot-time lost to inter-robot interference per interval.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceCurve {
    values: Vec<f64>,
    interval_len: u32,
    swarm_size: u32,
    controller_id: String,
    condition_tag: String,
}

impl InterferenceCurve {
    pub fn new(
        values: Vec<f64>,
        interval_len: u32,
        swarm_size: u32,
        controller_id: impl Into<String>,
        condition_tag: impl Into<String>,
    ) -> Result<Self, CurveError> {
        if values.is_empty() {
            return Err(CurveError::EmptyCurve);
        }
        if interval_len == 0 {
            return Err(CurveError::ZeroIntervalLen);
        }
        if swarm_size == 0 {
            return Err(CurveError::ZeroSwarmSize);
        }
        for (index, &value) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(CurveError::InvalidValue { index, value, problem: "outside [0, 1]" });
            }
        }
        let controller_id = controller_id.into();
        let condition_tag = condition_tag.into();
        check_label(&controller_id)?;
        check_label(&condition_tag)?;
        Ok(Self { values, interval_len, swarm_size, controller_id, condition_tag })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn interval_len(&self) -> u32 {
        self.interval_len
    }

    pub fn swarm_size(&self) -> u32 {
        self.swarm_size
    }

    pub fn controller_id(&self) -> &str {
        &self.controller_id
    }

    pub fn condition_tag(&self) -> &str {
        &self.condition_tag
    }
}

/// Tasked swarm size sampled once per interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationCurve {
    values: Vec<u32>,
    interval_len: u32,
    max_size: u32,
}

impl PopulationCurve {
    pub fn new(values: Vec<u32>, interval_len: u32, max_size: u32) -> Result<Self, CurveError> {
        if values.is_empty() {
            return Err(CurveError::EmptyCurve);
        }
        if interval_len == 0 {
            return Err(CurveError::ZeroIntervalLen);
        }
        for (index, &value) in values.iter().enumerate() {
            if value > max_size {
                return Err(CurveError::PopulationOverflow { index, value, max: max_size });
            }
        }
        Ok(Self { values, interval_len, max_size })
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn interval_len(&self) -> u32 {
        self.interval_len
    }

    pub fn max_size(&self) -> u32 {
        self.max_size
    }
}

/// The three curves produced by one run, plus the seed that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveBundle {
    pub performance: PerformanceCurve,
    pub interference: InterferenceCurve,
    pub population: PopulationCurve,
    pub run_seed: u64,
}

impl CurveBundle {
    pub fn new(
        performance: PerformanceCurve,
        interference: InterferenceCurve,
        population: PopulationCurve,
        run_seed: u64,
    ) -> Result<Self, CurveError> {
        check_shape(
            (performance.len(), performance.interval_len),
            (interference.len(), interference.interval_len),
        )?;
        check_shape(
            (performance.len(), performance.interval_len),
            (population.len(), population.interval_len),
        )?;
        if performance.swarm_size != interference.swarm_size
            || performance.swarm_size != population.max_size
        {
            return Err(CurveError::ShapeMismatch(format!(
                "swarm sizes disagree: perf {}, interference {}, population max {}",
                performance.swarm_size, interference.swarm_size, population.max_size
            )));
        }
        Ok(Self { performance, interference, population, run_seed })
    }

    pub fn len(&self) -> usize {
        self.performance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.performance.is_empty()
    }

    fn check_shape(&self, other: &CurveBundle) -> Result<(), CurveError> {
        self.performance.check_shape(&other.performance)
    }
}

/// Buckets raw per-timestep event counts into a rate-per-timestep curve.
///
/// `value[i]` is the number of events in interval `i` divided by
/// `interval_len`; a trailing partial interval is truncated.
pub fn aggregate_events(
    events: &[u64],
    interval_len: u32,
    swarm_size: u32,
    controller_id: impl Into<String>,
    condition_tag: impl Into<String>,
) -> Result<PerformanceCurve, CurveError> {
    if events.is_empty() {
        return Err(CurveError::EmptyEvents);
    }
    if interval_len == 0 {
        return Err(CurveError::ZeroIntervalLen);
    }
    let n_intervals = events.len() / interval_len as usize;
    if n_intervals == 0 {
        return Err(CurveError::ShapeMismatch(format!(
            "{} events cannot fill one interval of {} steps",
            events.len(),
            interval_len
        )));
    }
    let values = (0..n_intervals)
        .map(|i| {
            let start = i * interval_len as usize;
            let total: u64 = events[start..start + interval_len as usize].iter().sum();
            total as f64 / interval_len as f64
        })
        .collect();
    PerformanceCurve::new(values, interval_len, swarm_size, controller_id, condition_tag)
}

/// Maps each value to `1 / max(value, epsilon)`.
///
/// Turns smaller-is-better measures (e.g. mean time to completion) into
/// the larger-is-better form the metrics assume; `epsilon` guards the
/// division on zero-valued intervals.
pub fn reciprocal_transform(
    curve: &PerformanceCurve,
    epsilon: f64,
) -> Result<PerformanceCurve, CurveError> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(CurveError::NonPositiveEpsilon);
    }
    let values = curve.values.iter().map(|&v| 1.0 / v.max(epsilon)).collect();
    PerformanceCurve::new(
        values,
        curve.interval_len,
        curve.swarm_size,
        curve.controller_id.clone(),
        curve.condition_tag.clone(),
    )
}

/// Pointwise mean of several runs plus 95% confidence half-widths.
///
/// Returned by [`mean_over_runs`]; the half-width vectors are indexed per
/// interval. The mean population trace is rounded to the nearest robot
/// count.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMean {
    pub bundle: CurveBundle,
    pub perf_half_width: Vec<f64>,
    pub interference_half_width: Vec<f64>,
    pub population_half_width: Vec<f64>,
}

/// Averages bundles pointwise; half-width is `1.96 * s / sqrt(n_runs)`.
///
/// Requires at least two bundles of identical shape. The mean bundle
/// keeps the common seed when all runs share one and records 0 otherwise.
pub fn mean_over_runs(bundles: &[CurveBundle]) -> Result<RunMean, CurveError> {
    if bundles.len() < 2 {
        return Err(CurveError::TooFewRuns(bundles.len()));
    }
    let first = &bundles[0];
    for other in &bundles[1..] {
        first.check_shape(other)?;
    }
    let len = first.len();

    let mut perf_mean = vec![0.0; len];
    let mut intf_mean = vec![0.0; len];
    let mut pop_mean = vec![0.0; len];
    let mut perf_hw = vec![0.0; len];
    let mut intf_hw = vec![0.0; len];
    let mut pop_hw = vec![0.0; len];

    for i in 0..len {
        let perf: Vec<f64> = bundles.iter().map(|b| b.performance.values[i]).collect();
        let intf: Vec<f64> = bundles.iter().map(|b| b.interference.values[i]).collect();
        let pop: Vec<f64> = bundles.iter().map(|b| b.population.values[i] as f64).collect();
        (perf_mean[i], perf_hw[i]) = crate::stats::mean_ci(&perf);
        (intf_mean[i], intf_hw[i]) = crate::stats::mean_ci(&intf);
        (pop_mean[i], pop_hw[i]) = crate::stats::mean_ci(&pop);
    }
    // Interference means can drift a hair above 1.0 from accumulated
    // rounding; pin them back into range.
    for v in intf_mean.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }

    let seed = if bundles.iter().all(|b| b.run_seed == first.run_seed) {
        first.run_seed
    } else {
        0
    };
    let max_size = first.population.max_size;

    let bundle = CurveBundle::new(
        PerformanceCurve::new(
            perf_mean,
            first.performance.interval_len,
            first.performance.swarm_size,
            first.performance.controller_id.clone(),
            first.performance.condition_tag.clone(),
        )?,
        InterferenceCurve::new(
            intf_mean,
            first.interference.interval_len,
            first.interference.swarm_size,
            first.interference.controller_id.clone(),
            first.interference.condition_tag.clone(),
        )?,
        PopulationCurve::new(
            pop_mean.iter().map(|&v| v.round().min(max_size as f64) as u32).collect(),
            first.population.interval_len,
            max_size,
        )?,
        seed,
    )?;
    Ok(RunMean {
        bundle,
        perf_half_width: perf_hw,
        interference_half_width: intf_hw,
        population_half_width: pop_hw,
    })
}

/// Renders a bundle in the curve CSV format.
///
/// Layout: a `# run_seed=<seed>` provenance line, the fixed header, then
/// one row per interval. Floats use Rust's shortest round-trip formatting
/// so that [`parse_curves`] recovers them bit for bit.
pub fn format_curves(bundle: &CurveBundle) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# run_seed={}", bundle.run_seed);
    let _ = writeln!(out, "{CSV_HEADER}");
    for i in 0..bundle.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            i,
            bundle.performance.interval_len,
            bundle.performance.swarm_size,
            bundle.performance.controller_id,
            bundle.performance.condition_tag,
            bundle.performance.values[i],
            bundle.interference.values[i],
            bundle.population.values[i],
        );
    }
    out
}

/// Writes a bundle as CSV, atomically (temp file + rename).
pub fn write_curves(bundle: &CurveBundle, path: impl AsRef<Path>) -> Result<(), CurveError> {
    let path = path.as_ref();
    crate::util::write_atomic(path, format_curves(bundle).as_bytes()).map_err(|source| {
        CurveError::Io { path: path.display().to_string(), source }
    })
}

/// Reads a bundle from the curve CSV format written by [`write_curves`].
pub fn read_curves(path: impl AsRef<Path>) -> Result<CurveBundle, CurveError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CurveError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_curves(&text, &path.display().to_string())
}

fn parse_err(path: &str, line: usize, message: impl Into<String>) -> CurveError {
    CurveError::Parse { path: path.to_string(), line, message: message.into() }
}

/// Parses the curve CSV format; `path` only labels error messages.
pub fn parse_curves(text: &str, path: &str) -> Result<CurveBundle, CurveError> {
    let mut run_seed: u64 = 0;
    let mut header_seen = false;
    let mut meta: Option<(u32, u32, String, String)> = None;
    let mut perf = Vec::new();
    let mut intf = Vec::new();
    let mut pop = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(value) = comment.strip_prefix("run_seed=") {
                run_seed = value.parse().map_err(|_| {
                    parse_err(path, line_no, format!("invalid run_seed {value:?}"))
                })?;
            }
            continue;
        }
        if !header_seen {
            if line != CSV_HEADER {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("malformed header: expected {CSV_HEADER:?}, found {line:?}"),
                ));
            }
            header_seen = true;
            continue;
        }

        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(parse_err(
                path,
                line_no,
                format!("expected 8 columns, found {}", fields.len()),
            ));
        }
        let t: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(path, line_no, format!("non-numeric t {:?}", fields[0])))?;
        if t != perf.len() {
            return Err(parse_err(
                path,
                line_no,
                format!("interval index {} out of order (expected {})", t, perf.len()),
            ));
        }
        let interval_len: u32 = fields[1].parse().map_err(|_| {
            parse_err(path, line_no, format!("non-numeric interval_len {:?}", fields[1]))
        })?;
        let swarm_size: u32 = fields[2].parse().map_err(|_| {
            parse_err(path, line_no, format!("non-numeric swarm_size {:?}", fields[2]))
        })?;
        let controller = fields[3].to_string();
        let condition = fields[4].to_string();
        match &meta {
            None => meta = Some((interval_len, swarm_size, controller, condition)),
            Some((il, ss, ctrl, cond)) => {
                if *il != interval_len || *ss != swarm_size || ctrl != &controller || cond != &condition
                {
                    return Err(parse_err(
                        path,
                        line_no,
                        "metadata columns differ from previous rows",
                    ));
                }
            }
        }
        let p: f64 = fields[5]
            .parse()
            .map_err(|_| parse_err(path, line_no, format!("non-numeric perf {:?}", fields[5])))?;
        if !p.is_finite() || p < 0.0 {
            return Err(parse_err(path, line_no, format!("negative performance value {p}")));
        }
        let f: f64 = fields[6].parse().map_err(|_| {
            parse_err(path, line_no, format!("non-numeric interference {:?}", fields[6]))
        })?;
        if !(0.0..=1.0).contains(&f) {
            return Err(parse_err(path, line_no, format!("interference {f} outside [0, 1]")));
        }
        let n: u32 = fields[7].parse().map_err(|_| {
            parse_err(path, line_no, format!("non-numeric tasked_size {:?}", fields[7]))
        })?;
        if n > swarm_size {
            return Err(parse_err(
                path,
                line_no,
                format!("tasked_size {n} exceeds swarm_size {swarm_size}"),
            ));
        }
        perf.push(p);
        intf.push(f);
        pop.push(n);
    }

    if !header_seen {
        return Err(parse_err(path, 1, "missing header"));
    }
    let (interval_len, swarm_size, controller, condition) =
        meta.ok_or_else(|| parse_err(path, 2, "no data rows"))?;
    CurveBundle::new(
        PerformanceCurve::new(perf, interval_len, swarm_size, controller.clone(), condition.clone())
            .map_err(|e| parse_err(path, 2, e.to_string()))?,
        InterferenceCurve::new(intf, interval_len, swarm_size, controller, condition)
            .map_err(|e| parse_err(path, 2, e.to_string()))?,
        PopulationCurve::new(pop, interval_len, swarm_size)
            .map_err(|e| parse_err(path, 2, e.to_string()))?,
        run_seed,
    )
}
