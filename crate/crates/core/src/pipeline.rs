//! Running a filter over recorded data and feeding the detector.

use alloc::vec::Vec;

use crate::detect::{
    innovation, innovation_covariance, threshold_alarms, InnovationRecord, InnovationWeights,
    OnsetScanner,
};
use crate::filters::{predict, FilterKind, FilterState};
use crate::linalg::{check_len, symmetric_eigenvalues, Matrix, Vector};
use crate::model::{FaultProfile, LtvSystem, SimulationTrace};
use crate::{Error, Result};

/// One measurement update: innovation record plus the updated state
/// (prior, posterior and the gain `K_k` used).
#[derive(Debug, Clone, PartialEq)]
pub struct FilterStep {
    pub innovation: InnovationRecord,
    pub state: FilterState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterRun {
    pub filter: FilterKind,
    pub steps: Vec<FilterStep>,
}

impl FilterRun {
    pub fn innovations(&self) -> impl Iterator<Item = &InnovationRecord> {
        self.steps.iter().map(|s| &s.innovation)
    }
}

/// Filters `outputs` given the applied `inputs`, starting from `initial`.
pub fn run_filter(
    system: &LtvSystem,
    filter: &FilterKind,
    initial: &FilterState,
    outputs: &[Vector],
    inputs: &[Vector],
) -> Result<FilterRun> {
    if outputs.len() != inputs.len() {
        return Err(Error::dimension(
            "input sequence",
            (outputs.len(), 1),
            (inputs.len(), 1),
        ));
    }
    let dims = system.dims();
    check_len("initial estimate", &initial.x_prior, dims.n)?;
    let mut state = initial.clone();
    let mut steps = Vec::with_capacity(outputs.len());
    for (k, (y, u)) in outputs.iter().zip(inputs).enumerate() {
        state.step = k;
        let mats = system.matrices_at(k);
        let epsilon = innovation(y, &state.x_prior, mats.c, mats.d, u)?;
        let sigma = innovation_covariance(mats.c, &state.p_prior, mats.r);
        let updated = filter.update(&state, y, mats.c, mats.d, mats.r, u)?;
        state = predict(&updated, mats.a, mats.b, mats.q, u)?;
        steps.push(FilterStep {
            innovation: InnovationRecord {
                step: k,
                epsilon,
                sigma,
            },
            state: updated,
        });
    }
    Ok(FilterRun {
        filter: filter.clone(),
        steps,
    })
}

pub fn run_filter_on_trace(
    system: &LtvSystem,
    filter: &FilterKind,
    initial: &FilterState,
    trace: &SimulationTrace,
) -> Result<FilterRun> {
    run_filter(system, filter, initial, &trace.outputs, &trace.inputs)
}

/// Search window `w̄`, minimum gap / excitation window `s`, excitation level
/// `γ` and an optional alarm threshold `τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub window: usize,
    pub min_gap: usize,
    pub excitation_threshold: f64,
    pub threshold: Option<f64>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            window: 100,
            min_gap: 20,
            excitation_threshold: 1e-6,
            threshold: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alarm {
    pub step: usize,
    pub onset: usize,
    pub h: f64,
}

/// Persistent excitation of the final onset estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitationStatus {
    pub satisfied: bool,
    pub window: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    /// `max_r h_k(r)`, zero where no candidate is admissible.
    pub h: Vec<f64>,
    pub theta_hat: Vec<Option<Vector>>,
    pub r_hat: Vec<Option<usize>>,
    /// `(r, h_k(r))` per step.
    pub candidates: Vec<Vec<(usize, f64)>>,
    pub threshold: Option<f64>,
    /// `h` with sub-threshold values zeroed; equals `h` without a threshold.
    pub thresholded: Vec<f64>,
    pub alarms: Vec<Alarm>,
    pub excitation: ExcitationStatus,
}

impl DetectionReport {
    pub fn alarm_steps(&self) -> impl Iterator<Item = usize> + '_ {
        self.alarms.iter().map(|a| a.step)
    }
}

/// Runs the unknown-onset detector over a filter run.
pub fn detect(
    system: &LtvSystem,
    run: &FilterRun,
    profile: &FaultProfile,
    config: &DetectorConfig,
) -> Result<DetectionReport> {
    let mut scanner = OnsetScanner::new(profile.clone(), config.window, config.min_gap)?;
    let steps = run.steps.len();
    let mut report = DetectionReport {
        h: Vec::with_capacity(steps),
        theta_hat: Vec::with_capacity(steps),
        r_hat: Vec::with_capacity(steps),
        candidates: Vec::with_capacity(steps),
        threshold: config.threshold,
        thresholded: Vec::new(),
        alarms: Vec::new(),
        excitation: ExcitationStatus {
            satisfied: false,
            window: config.min_gap,
            threshold: config.excitation_threshold,
        },
    };
    let mut last_excitation = None;
    for (k, step) in run.steps.iter().enumerate() {
        let mats = system.matrices_at(k);
        let rec = &step.innovation;
        let weights = InnovationWeights::new(mats.c, &rec.sigma, &rec.epsilon, k)?;
        let n = mats.a.nrows();
        let transfer: Matrix = mats.a * (Matrix::identity(n, n) - &step.state.gain * mats.c);
        match scanner.observe(k, &transfer, &weights)? {
            Some(est) => {
                report.h.push(est.h);
                report.theta_hat.push(Some(est.theta));
                report.r_hat.push(Some(est.onset));
                report.candidates.push(est.candidates);
                last_excitation = est.excitation;
            }
            None => {
                report.h.push(0.0);
                report.theta_hat.push(None);
                report.r_hat.push(None);
                report.candidates.push(Vec::new());
                last_excitation = None;
            }
        }
    }
    report.excitation.satisfied = last_excitation
        .is_some_and(|sum| symmetric_eigenvalues(&sum).min() >= config.excitation_threshold);
    match config.threshold {
        Some(tau) => {
            let t = threshold_alarms(&report.h, tau);
            report.alarms = t
                .alarms
                .iter()
                .map(|&k| Alarm {
                    step: k,
                    onset: report.r_hat[k].expect("alarms need a positive statistic"),
                    h: report.h[k],
                })
                .collect();
            report.thresholded = t.series;
        }
        None => report.thresholded = report.h.clone(),
    }
    Ok(report)
}
