//! Monte-Carlo harness: paired runs, threshold calibration, detector
//! comparison and the benchmark figure data.

use ltv_sentinel_core::benchmark;
use ltv_sentinel_core::model::SimulationTrace;
use ltv_sentinel_core::pipeline::{detect, run_filter_on_trace, DetectionReport, FilterRun};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{FaultKindName, FilterName, ScenarioConfig};
use crate::error::AppError;
use crate::manifest::RunManifest;
use crate::output::{self, MetricsRow, OutputFile};

/// Calibration seeds live far from the evaluation seeds so the threshold is
/// always judged on held-out noise.
pub const CALIBRATION_SEED_OFFSET: u64 = 1_000_000;

/// Seed used for the single-realization figure data.
pub const FIGURE_SEED: u64 = 7;

pub const THREADS_ENV: &str = "LTV_SENTINEL_THREADS";

/// Runs `f` on a pool capped by `LTV_SENTINEL_THREADS` when set.
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    match threads {
        Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        _ => f(),
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: SimulationTrace,
    pub run: FilterRun,
    pub report: DetectionReport,
}

/// Simulates, filters and runs the detector for one configuration.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunOutcome, AppError> {
    let scenario = config.scenario()?;
    let dims = scenario.system.dims();
    let trace = scenario.simulate()?;
    let filter = config.filter_kind(dims)?;
    let initial = config.initial_filter_state(dims)?;
    let run = run_filter_on_trace(&scenario.system, &filter, &initial, &trace)?;
    let profile = config.fault_profile(dims)?;
    let report = detect(&scenario.system, &run, &profile, &config.detector_config())?;
    Ok(RunOutcome { trace, run, report })
}

pub fn with_seed(config: &ScenarioConfig, seed: u64) -> ScenarioConfig {
    let mut c = config.clone();
    c.noise.seed = seed;
    c
}

/// Same configuration with the fault switched off; the detector keeps
/// looking for the same fault shape.
pub fn fault_free(config: &ScenarioConfig) -> ScenarioConfig {
    let mut c = config.clone();
    c.fault.kind = FaultKindName::None;
    if c.fault.profile.is_none() {
        c.fault.theta.clear();
    }
    c
}

/// Faulty and fault-free runs sharing one noise realization.
#[derive(Debug, Clone)]
pub struct PairedRun {
    pub seed: u64,
    pub faulty: RunOutcome,
    pub fault_free: RunOutcome,
}

pub fn paired_run(config: &ScenarioConfig, seed: u64) -> Result<PairedRun, AppError> {
    let c = with_seed(config, seed);
    let context = |e: AppError, what: &str| e.context(format!("{what} run, seed {seed}"));
    Ok(PairedRun {
        seed,
        faulty: run_scenario(&c).map_err(|e| context(e, "faulty"))?,
        fault_free: run_scenario(&fault_free(&c)).map_err(|e| context(e, "fault-free"))?,
    })
}

/// Linear-interpolation quantile (`q` in `[0, 1]`) of unsorted samples.
pub fn quantile(samples: &[f64], q: f64) -> f64 {
    assert!(!samples.is_empty(), "quantile of an empty sample");
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median(samples: &[f64]) -> f64 {
    quantile(samples, 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub filter: String,
    pub alpha: f64,
    pub seeds: Vec<u64>,
    pub samples: usize,
    pub quantile_99: f64,
    pub factor: f64,
    pub tau: f64,
}

/// `τ = c · q99(h)`, pooling `h_k` over every step with an admissible onset
/// candidate in `seeds` fault-free runs at seeds `1_000_000 + i`.
pub fn calibrate_threshold(
    config: &ScenarioConfig,
    seeds: usize,
    factor: f64,
) -> Result<Calibration, AppError> {
    if seeds == 0 {
        return Err(AppError::Config(
            "calibration needs at least one seed".into(),
        ));
    }
    if !(factor.is_finite() && factor > 0.0) {
        return Err(AppError::Config(format!(
            "calibration factor must be positive, got {factor}"
        )));
    }
    let mut base = fault_free(config);
    base.detector.tau = None;
    let seed_list: Vec<u64> = (0..seeds as u64)
        .map(|i| CALIBRATION_SEED_OFFSET + i)
        .collect();
    let per_seed: Vec<Vec<f64>> = with_pool(|| {
        seed_list
            .par_iter()
            .map(|&seed| {
                let out = run_scenario(&with_seed(&base, seed))
                    .map_err(|e| e.context(format!("calibration run, seed {seed}")))?;
                Ok(out
                    .report
                    .h
                    .iter()
                    .zip(&out.report.r_hat)
                    .filter(|(_, r)| r.is_some())
                    .map(|(&h, _)| h)
                    .collect())
            })
            .collect::<Result<_, AppError>>()
    })?;
    let pooled: Vec<f64> = per_seed.into_iter().flatten().collect();
    if pooled.is_empty() {
        return Err(AppError::Config(
            "horizon too short: no step has an admissible onset".into(),
        ));
    }
    let q99 = quantile(&pooled, 0.99);
    Ok(Calibration {
        filter: config.filter.kind.as_str().into(),
        alpha: config.filter.alpha,
        seeds: seed_list,
        samples: pooled.len(),
        quantile_99: q99,
        factor,
        tau: factor * q99,
    })
}

/// Per-seed outcome of a paired run against threshold `τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedMetrics {
    pub seed: u64,
    /// Alarm in `(r, r + w̄]` on the faulty run.
    pub detected: bool,
    /// Any alarm on the fault-free run.
    pub false_alarm: bool,
    /// `|r̂ − r|` at step `min(r + w̄, N − 1)`, if an onset was estimated.
    pub onset_error: Option<usize>,
    /// Peak `h` in `(r, r + w̄]`, faulty over fault-free.
    pub h_jump: f64,
}

fn window_max(h: &[f64], lo: usize, hi: usize) -> f64 {
    h.iter().take(hi + 1).skip(lo).copied().fold(0.0, f64::max)
}

pub fn seed_metrics(pair: &PairedRun, onset: usize, window: usize) -> SeedMetrics {
    let horizon = pair.faulty.report.h.len();
    let last = (onset + window).min(horizon.saturating_sub(1));
    let first = onset + 1;
    let detected = pair
        .faulty
        .report
        .alarm_steps()
        .any(|k| k > onset && k <= onset + window);
    let false_alarm = !pair.fault_free.report.alarms.is_empty();
    let onset_error = pair
        .faulty
        .report
        .r_hat
        .get(last)
        .copied()
        .flatten()
        .map(|r| r.abs_diff(onset));
    let peak = window_max(&pair.faulty.report.h, first, last);
    let baseline = window_max(&pair.fault_free.report.h, first, last);
    SeedMetrics {
        seed: pair.seed,
        detected,
        false_alarm,
        onset_error,
        h_jump: peak / baseline,
    }
}

pub fn summarize(name: &str, metrics: &[SeedMetrics]) -> MetricsRow {
    let n = metrics.len().max(1) as f64;
    let rate = |f: fn(&SeedMetrics) -> bool| metrics.iter().filter(|m| f(m)).count() as f64 / n;
    let errors: Vec<f64> = metrics
        .iter()
        .filter_map(|m| m.onset_error)
        .map(|e| e as f64)
        .collect();
    let jumps: Vec<f64> = metrics
        .iter()
        .map(|m| m.h_jump)
        .filter(|j| !j.is_nan())
        .collect();
    MetricsRow {
        config: name.into(),
        seeds: metrics.len(),
        detect_rate: rate(|m| m.detected),
        false_alarm_rate: rate(|m| m.false_alarm),
        mean_abs_onset_err: if errors.is_empty() {
            f64::NAN
        } else {
            errors.iter().sum::<f64>() / errors.len() as f64
        },
        median_h_jump: if jumps.is_empty() {
            f64::NAN
        } else {
            median(&jumps)
        },
    }
}

/// Paired runs for each seed, in seed order.
pub fn paired_runs(config: &ScenarioConfig, seeds: &[u64]) -> Result<Vec<PairedRun>, AppError> {
    with_pool(|| seeds.par_iter().map(|&s| paired_run(config, s)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<MetricsRow>,
    pub calibrations: Vec<Calibration>,
    pub per_seed: Vec<Vec<SeedMetrics>>,
}

/// Compares every configured filter on the same seeds. A filter without a
/// fixed `τ` gets its own calibrated threshold.
pub fn compare_detectors(config: &ScenarioConfig, seeds: &[u64]) -> Result<Comparison, AppError> {
    if config.fault.kind == FaultKindName::None {
        return Err(AppError::Config("compare needs a fault to detect".into()));
    }
    let mut out = Comparison {
        rows: Vec::new(),
        calibrations: Vec::new(),
        per_seed: Vec::new(),
    };
    for entry in config.compare_entries() {
        let mut c = config.with_filter(entry.filter, entry.alpha);
        let what = |e: AppError| e.context(format!("configuration `{}`", entry.name));
        if c.detector.tau.is_none() {
            let cal = calibrate_threshold(
                &c,
                c.detector.calibration_seeds,
                c.detector.calibration_factor,
            )
            .map_err(what)?;
            c.detector.tau = Some(cal.tau);
            out.calibrations.push(cal);
        }
        let pairs = paired_runs(&c, seeds).map_err(what)?;
        let metrics: Vec<SeedMetrics> = pairs
            .iter()
            .map(|p| seed_metrics(p, c.fault.onset, c.detector.window))
            .collect();
        out.rows.push(summarize(&entry.name, &metrics));
        out.per_seed.push(metrics);
    }
    Ok(out)
}

fn theta_tag(theta: [f64; 2]) -> String {
    format!("{}", theta[0]).replace('.', "p")
}

/// Innovation sequence `(ε_k, tr Σ_k)` of a run.
pub fn innovation_series(run: &FilterRun) -> Vec<(Vec<f64>, f64)> {
    run.innovations()
        .map(|r| (r.epsilon.iter().copied().collect(), r.sigma.trace()))
        .collect()
}

/// Figure data for the benchmark: innovation and thresholded `h` series
/// for the Kalman and H-infinity (`α = 60`) filters at both fault sizes,
/// each with its own calibrated threshold.
pub fn reproduce_paper(calibration_seeds: usize, factor: f64) -> Result<Vec<OutputFile>, AppError> {
    let mut files = Vec::new();
    let mut taus = Vec::new();
    let mut manifest_configs = Vec::new();
    for (name, kind, alpha) in [
        ("kalman", FilterName::Kalman, 0.0),
        ("hinf", FilterName::Hinf, benchmark::ALPHA),
    ] {
        let base =
            ScenarioConfig::benchmark(benchmark::LARGE_FAULT, FIGURE_SEED).with_filter(kind, alpha);
        let cal =
            calibrate_threshold(&base, calibration_seeds, factor).map_err(|e| e.context(name))?;
        taus.push((name, cal.tau));
        for theta in [benchmark::LARGE_FAULT, benchmark::SMALL_FAULT] {
            let mut c = ScenarioConfig::benchmark(theta, FIGURE_SEED).with_filter(kind, alpha);
            c.detector.tau = Some(cal.tau);
            let tag = theta_tag(theta);
            let out = run_scenario(&c).map_err(|e| e.context(format!("{name}, theta {tag}")))?;
            files.push(OutputFile::new(
                format!("innovation_{name}_theta_{tag}.csv"),
                output::innovation_csv(&innovation_series(&out.run)),
            ));
            files.push(OutputFile::new(
                format!("gir_{name}_theta_{tag}.csv"),
                output::gir_csv(&out.report),
            ));
            manifest_configs.push(c);
        }
    }
    let names: Vec<String> = files.iter().map(|f| f.name.clone()).collect();
    let manifests: Vec<RunManifest> = manifest_configs
        .iter()
        .map(|c| {
            RunManifest::new(
                "reproduce-paper",
                c,
                vec![FIGURE_SEED],
                c.detector.tau,
                names.clone(),
            )
        })
        .collect::<Result<_, _>>()?;
    files.push(OutputFile::json(
        "manifest.json",
        &PaperManifest {
            figure_seed: FIGURE_SEED,
            calibration_seeds,
            calibration_factor: factor,
            tau: taus.iter().map(|(n, t)| ((*n).to_string(), *t)).collect(),
            runs: manifests,
        },
    ));
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperManifest {
    pub figure_seed: u64,
    pub calibration_seeds: usize,
    pub calibration_factor: f64,
    pub tau: std::collections::BTreeMap<String, f64>,
    pub runs: Vec<RunManifest>,
}
