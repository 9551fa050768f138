//! `ltv-sentinel` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{FilterName, ScenarioConfig};
use crate::error::AppError;
use crate::experiments::{calibrate_threshold, compare_detectors, reproduce_paper, run_scenario};
use crate::manifest::RunManifest;
use crate::output::{self, OutputFile};

#[derive(Debug, Parser)]
#[command(
    name = "ltv-sentinel",
    version,
    about = "Robust fault detection for linear time-varying systems"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the plant and write the trace.
    Simulate(Common),
    /// Simulate, filter and run the fault detector.
    Detect(DetectArgs),
    /// Write the benchmark figure data.
    ReproducePaper(ReproduceArgs),
    /// Monte-Carlo comparison of detector configurations.
    Compare(CompareArgs),
    /// Calibrate the alarm threshold on fault-free runs.
    CalibrateThreshold(CalibrateArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario file (TOML), or a run manifest (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Override the noise seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long, value_enum)]
    pub filter: Option<FilterName>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Onset search window.
    #[arg(long)]
    pub window: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub filter: FilterArgs,
    /// Alarm threshold.
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Fault-free seeds used to calibrate each threshold.
    #[arg(long, default_value_t = crate::config::DEFAULT_CALIBRATION_SEEDS)]
    pub seeds: usize,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of paired seeds, counted up from the configured seed.
    #[arg(long, default_value_t = 100)]
    pub seeds: usize,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub window: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Write `calibration.json` here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[arg(long)]
    pub seeds: Option<usize>,
}

fn load(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig, AppError> {
    let mut config = ScenarioConfig::load(path)?;
    if let Some(seed) = seed {
        config.noise.seed = seed;
    }
    Ok(config)
}

fn apply_filter(config: &mut ScenarioConfig, args: &FilterArgs) {
    if let Some(kind) = args.filter {
        config.filter.kind = kind;
    }
    if let Some(alpha) = args.alpha {
        config.filter.alpha = alpha;
    }
    if let Some(window) = args.window {
        config.detector.window = window;
    }
}

fn finish(out: &Path, files: &[OutputFile]) -> Result<(), AppError> {
    for path in output::write_all(out, files)? {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn names(files: &[OutputFile]) -> Vec<String> {
    files.iter().map(|f| f.name.clone()).collect()
}

#[derive(Serialize)]
struct DetectionMeta<'a> {
    filter: &'a str,
    alpha: f64,
    tau: Option<f64>,
    min_gap: usize,
    excitation_threshold: f64,
    window: usize,
    seed: u64,
    excitation_satisfied: bool,
    sigma_source: &'a str,
}

fn simulate(args: &Common) -> Result<(), AppError> {
    let config = load(&args.config, args.seed)?;
    let trace = config.scenario()?.simulate()?;
    let mut files = vec![OutputFile::new("trace.csv", output::trace_csv(&trace))];
    let manifest = RunManifest::new(
        "simulate",
        &config,
        vec![config.noise.seed],
        None,
        names(&files),
    )?;
    files.push(OutputFile::json("manifest.json", &manifest));
    finish(&args.out, &files)
}

fn detect(args: &DetectArgs) -> Result<(), AppError> {
    let mut config = load(&args.common.config, args.common.seed)?;
    apply_filter(&mut config, &args.filter);
    if let Some(tau) = args.tau {
        config.detector.tau = Some(tau);
    }
    let out = run_scenario(&config)?;
    let m = config.fault_profile(config.system()?.dims())?.columns();
    let meta = DetectionMeta {
        filter: config.filter.kind.as_str(),
        alpha: config.filter.alpha,
        tau: config.detector.tau,
        min_gap: config.detector.min_gap,
        excitation_threshold: config.detector.excitation_threshold,
        window: config.detector.window,
        seed: config.noise.seed,
        excitation_satisfied: out.report.excitation.satisfied,
        sigma_source: match config.filter.kind {
            FilterName::Kalman => "kalman prior covariance",
            FilterName::Hinf => "h-infinity design covariance",
        },
    };
    let mut files = vec![
        OutputFile::new("detection.csv", output::detection_csv(&out.report, m)),
        OutputFile::json("detection.meta.json", &meta),
    ];
    let manifest = RunManifest::new(
        "detect",
        &config,
        vec![config.noise.seed],
        config.detector.tau,
        names(&files),
    )?;
    files.push(OutputFile::json("manifest.json", &manifest));
    finish(&args.common.out, &files)
}

fn compare(args: &CompareArgs) -> Result<(), AppError> {
    let mut config = load(&args.common.config, args.common.seed)?;
    if args.seeds == 0 {
        return Err(AppError::Usage("--seeds must be positive".into()));
    }
    if let Some(tau) = args.tau {
        config.detector.tau = Some(tau);
    }
    if let Some(window) = args.window {
        config.detector.window = window;
    }
    let base = config.noise.seed;
    let seeds: Vec<u64> = (base..base + args.seeds as u64).collect();
    let result = compare_detectors(&config, &seeds)?;
    let mut files = vec![
        OutputFile::new("metrics.csv", output::metrics_csv(&result.rows)),
        OutputFile::json("calibration.json", &result.calibrations),
    ];
    let manifest = RunManifest::new(
        "compare",
        &config,
        seeds,
        config.detector.tau,
        names(&files),
    )?;
    files.push(OutputFile::json("manifest.json", &manifest));
    finish(&args.common.out, &files)
}

fn calibrate(args: &CalibrateArgs) -> Result<(), AppError> {
    let mut config = load(&args.config, None)?;
    apply_filter(&mut config, &args.filter);
    let seeds = args.seeds.unwrap_or(config.detector.calibration_seeds);
    let cal = calibrate_threshold(&config, seeds, config.detector.calibration_factor)?;
    println!("{}", cal.tau);
    if let Some(out) = &args.out {
        finish(out, &[OutputFile::json("calibration.json", &cal)])?;
    }
    Ok(())
}

fn reproduce(args: &ReproduceArgs) -> Result<(), AppError> {
    let files = reproduce_paper(args.seeds, crate::config::DEFAULT_CALIBRATION_FACTOR)?;
    finish(&args.out, &files)
}

pub fn execute(cli: &Cli) -> Result<(), AppError> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Detect(a) => detect(a),
        Command::ReproducePaper(a) => reproduce(a),
        Command::Compare(a) => compare(a),
        Command::CalibrateThreshold(a) => calibrate(a),
    }
}

/// Parses `argv`, runs the workflow and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                if !e.to_string().contains(&s.to_string()) {
                    eprintln!("  caused by: {s}");
                }
                source = s.source();
            }
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}
