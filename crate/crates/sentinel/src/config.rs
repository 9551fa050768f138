//! Scenario configuration files (TOML).
//!
//! Matrices are nested arrays of rows. Any system matrix may instead be a
//! per-step table, `a = { table = { "0" = [[...]], "150" = [[...]] } }`,
//! where each entry holds from its step until the next key.

use std::collections::BTreeMap;
use std::path::Path;

use ltv_sentinel_core::benchmark;
use ltv_sentinel_core::filters::{FilterKind, FilterState, HinfConfig};
use ltv_sentinel_core::model::{
    Controller, Dimensions, FaultModel, FaultProfile, LtvSystem, NoiseKind, NoiseModel, Scenario,
    Schedule,
};
use ltv_sentinel_core::pipeline::DetectorConfig;
use ltv_sentinel_core::{Matrix, Vector};
use serde::{Deserialize, Serialize};

use crate::error::AppError;

pub const DEFAULT_HORIZON: usize = 400;
pub const DEFAULT_CALIBRATION_FACTOR: f64 = 3.0;
pub const DEFAULT_CALIBRATION_SEEDS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Constant(Vec<Vec<f64>>),
    Table {
        table: BTreeMap<String, Vec<Vec<f64>>>,
    },
}

fn to_matrix(rows: &[Vec<f64>], name: &str) -> Result<Matrix, AppError> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(AppError::Config(format!("matrix `{name}` has ragged rows")));
    }
    Ok(Matrix::from_row_iterator(
        nrows,
        ncols,
        rows.iter().flatten().copied(),
    ))
}

impl MatrixSpec {
    fn to_schedule(&self, name: &str) -> Result<Schedule, AppError> {
        match self {
            MatrixSpec::Constant(rows) => Ok(Schedule::Constant(to_matrix(rows, name)?)),
            MatrixSpec::Table { table } => {
                let mut entries = BTreeMap::new();
                for (key, rows) in table {
                    let k: usize = key.parse().map_err(|_| {
                        AppError::Config(format!(
                            "table key `{key}` of `{name}` is not a step index"
                        ))
                    })?;
                    entries.insert(k, to_matrix(rows, name)?);
                }
                Ok(Schedule::table(entries)?)
            }
        }
    }

    fn first(&self, name: &str) -> Result<Matrix, AppError> {
        Ok(self.to_schedule(name)?.at(0).clone())
    }

    pub fn from_matrix(m: &Matrix) -> Self {
        MatrixSpec::Constant(m.row_iter().map(|r| r.iter().copied().collect()).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub a: MatrixSpec,
    pub b: Option<MatrixSpec>,
    pub c: MatrixSpec,
    pub d: Option<MatrixSpec>,
    /// Process covariance; defaults to `process_variance · I`.
    pub q: Option<MatrixSpec>,
    pub process_variance: Option<f64>,
    pub r: MatrixSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKindName {
    Gaussian,
    PaperRandomWalk,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: NoiseKindName,
    #[serde(default)]
    pub seed: u64,
    pub coupling: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub independent_driver: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKindName {
    None,
    Step,
    Impulse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultConfig {
    pub kind: FaultKindName,
    #[serde(default)]
    pub onset: usize,
    #[serde(default)]
    pub theta: Vec<f64>,
    /// Step profile `Ψ̃_k`. With `kind = "none"` it selects a step-shaped
    /// detector; otherwise the detector looks for impulses.
    pub profile: Option<MatrixSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKindName {
    None,
    DiscretePi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub kind: ControllerKindName,
    #[serde(default)]
    pub kp: f64,
    #[serde(default)]
    pub ki: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FilterName {
    Kalman,
    Hinf,
}

impl FilterName {
    pub fn as_str(self) -> &'static str {
        match self {
            FilterName::Kalman => "kalman",
            FilterName::Hinf => "hinf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub kind: FilterName,
    #[serde(default)]
    pub alpha: f64,
    /// `P_{0|-1}`, identity by default.
    pub initial_covariance: Option<Vec<Vec<f64>>>,
    /// `x̂_{0|-1}`, zero by default.
    pub initial_estimate: Option<Vec<f64>>,
    /// `S_k`, identity by default.
    pub weight: Option<MatrixSpec>,
    /// `L_k`, identity by default.
    pub combination: Option<MatrixSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_min_gap")]
    pub min_gap: usize,
    #[serde(default = "default_excitation")]
    pub excitation_threshold: f64,
    pub tau: Option<f64>,
    #[serde(default = "default_factor")]
    pub calibration_factor: f64,
    #[serde(default = "default_calibration_seeds")]
    pub calibration_seeds: usize,
}

fn default_window() -> usize {
    benchmark::SEARCH_WINDOW
}
fn default_min_gap() -> usize {
    20
}
fn default_excitation() -> f64 {
    1e-6
}
fn default_factor() -> f64 {
    DEFAULT_CALIBRATION_FACTOR
}
fn default_calibration_seeds() -> usize {
    DEFAULT_CALIBRATION_SEEDS
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            window: default_window(),
            min_gap: default_min_gap(),
            excitation_threshold: default_excitation(),
            tau: None,
            calibration_factor: default_factor(),
            calibration_seeds: default_calibration_seeds(),
        }
    }
}

/// One row of a detector comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareEntry {
    pub name: String,
    pub filter: FilterName,
    #[serde(default)]
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    pub initial_state: Option<Vec<f64>>,
    pub system: SystemConfig,
    pub noise: NoiseConfig,
    pub fault: FaultConfig,
    pub controller: Option<ControllerConfig>,
    pub filter: FilterConfig,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub compare: Vec<CompareEntry>,
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, AppError> {
        toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario configs always serialize")
    }

    /// Loads a TOML scenario, or the scenario embedded in a JSON run
    /// manifest.
    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let manifest: crate::manifest::RunManifest =
                serde_json::from_str(&text).map_err(|e| AppError::Config(e.to_string()))?;
            return manifest.config.ok_or_else(|| {
                AppError::Config("manifest does not embed a scenario config".into())
            });
        }
        Self::from_toml(&text)
    }

    /// The two-state benchmark with an impulsive fault `theta` at step 201,
    /// random-walk noise, the PI loop and an H-infinity filter with `α = 60`.
    pub fn benchmark(theta: [f64; 2], seed: u64) -> Self {
        let q = benchmark::DEFAULT_PROCESS_VARIANCE;
        let init = benchmark::initial_filter_state(q);
        ScenarioConfig {
            horizon: benchmark::HORIZON,
            initial_state: Some(vec![0.0, 0.0]),
            system: SystemConfig {
                a: MatrixSpec::from_matrix(&benchmark::transition()),
                b: Some(MatrixSpec::Constant(vec![vec![0.0], vec![1.0]])),
                c: MatrixSpec::from_matrix(&benchmark::observation()),
                d: Some(MatrixSpec::Constant(vec![vec![0.0]])),
                q: None,
                process_variance: Some(q),
                r: MatrixSpec::Constant(vec![vec![benchmark::MEASUREMENT_VARIANCE]]),
            },
            noise: NoiseConfig {
                kind: NoiseKindName::PaperRandomWalk,
                seed,
                coupling: Some(vec![vec![1.0], vec![1.0]]),
                independent_driver: false,
            },
            fault: FaultConfig {
                kind: FaultKindName::Impulse,
                onset: benchmark::ONSET,
                theta: theta.to_vec(),
                profile: None,
            },
            controller: Some(ControllerConfig {
                kind: ControllerKindName::DiscretePi,
                kp: benchmark::PROPORTIONAL_GAIN,
                ki: benchmark::INTEGRAL_GAIN,
            }),
            filter: FilterConfig {
                kind: FilterName::Hinf,
                alpha: benchmark::ALPHA,
                initial_covariance: Some(rows_of(&init.p_prior)),
                initial_estimate: Some(init.x_prior.iter().copied().collect()),
                weight: None,
                combination: None,
            },
            detector: DetectorSection::default(),
            compare: Vec::new(),
        }
    }

    fn dims(&self) -> Result<Dimensions, AppError> {
        let a = self.system.a.first("a")?;
        let c = self.system.c.first("c")?;
        let l = match &self.system.b {
            Some(b) => b.first("b")?.ncols(),
            None => 0,
        };
        let m = match (&self.fault.kind, &self.fault.profile) {
            (FaultKindName::Impulse, _) | (FaultKindName::None, None) => a.nrows(),
            (_, Some(p)) => p.first("fault.profile")?.ncols(),
            (FaultKindName::Step, None) => {
                return Err(AppError::Config("step faults need `fault.profile`".into()));
            }
        };
        Ok(Dimensions::new(a.nrows(), l, c.nrows(), m)?)
    }

    pub fn system(&self) -> Result<LtvSystem, AppError> {
        let dims = self.dims()?;
        let s = &self.system;
        let b = match &s.b {
            Some(b) => b.to_schedule("b")?,
            None => Schedule::Constant(Matrix::zeros(dims.n, 0)),
        };
        let d = match &s.d {
            Some(d) => d.to_schedule("d")?,
            None => Schedule::Constant(Matrix::zeros(dims.p, dims.l)),
        };
        let q = match (&s.q, s.process_variance) {
            (Some(_), Some(_)) => {
                return Err(AppError::Config(
                    "give either `system.q` or `system.process_variance`".into(),
                ));
            }
            (Some(q), None) => q.to_schedule("q")?,
            (None, v) => Schedule::Constant(
                Matrix::identity(dims.n, dims.n) * v.unwrap_or(benchmark::DEFAULT_PROCESS_VARIANCE),
            ),
        };
        Ok(LtvSystem::new(
            dims,
            s.a.to_schedule("a")?,
            b,
            s.c.to_schedule("c")?,
            d,
            q,
            s.r.to_schedule("r")?,
        )?)
    }

    pub fn fault_profile(&self, dims: Dimensions) -> Result<FaultProfile, AppError> {
        Ok(match (&self.fault.kind, &self.fault.profile) {
            (FaultKindName::Impulse, _) | (FaultKindName::None, None) => {
                FaultProfile::Impulse { n: dims.n }
            }
            (_, Some(p)) => FaultProfile::Step(p.to_schedule("fault.profile")?),
            (FaultKindName::Step, None) => unreachable!("checked in dims()"),
        })
    }

    pub fn fault(&self, dims: Dimensions) -> Result<FaultModel, AppError> {
        let profile = self.fault_profile(dims)?;
        let theta = Vector::from_row_slice(&self.fault.theta);
        Ok(match self.fault.kind {
            FaultKindName::None => FaultModel::none(profile),
            FaultKindName::Impulse => {
                if theta.len() != dims.n {
                    return Err(AppError::Config(format!(
                        "impulse fault needs theta of length {}, got {}",
                        dims.n,
                        theta.len()
                    )));
                }
                FaultModel::impulse(self.fault.onset, theta)
            }
            FaultKindName::Step => match profile {
                FaultProfile::Step(s) => FaultModel::step(s, self.fault.onset, theta)?,
                FaultProfile::Impulse { .. } => unreachable!(),
            },
        })
    }

    pub fn noise(&self, dims: Dimensions) -> Result<NoiseModel, AppError> {
        let n = &self.noise;
        let kind = match n.kind {
            NoiseKindName::Gaussian => NoiseKind::Gaussian,
            NoiseKindName::Zero => NoiseKind::Zero,
            NoiseKindName::PaperRandomWalk => NoiseKind::RandomWalk {
                coupling: match &n.coupling {
                    Some(rows) => to_matrix(rows, "noise.coupling")?,
                    None => Matrix::from_element(dims.n, dims.p, 1.0),
                },
                independent_driver: n.independent_driver,
            },
        };
        Ok(NoiseModel::new(kind, n.seed))
    }

    pub fn controller(&self, dims: Dimensions) -> Controller {
        match &self.controller {
            Some(ControllerConfig {
                kind: ControllerKindName::DiscretePi,
                kp,
                ki,
            }) => Controller::discrete_pi(*kp, *ki, dims.p),
            _ => Controller::none(dims.l),
        }
    }

    pub fn scenario(&self) -> Result<Scenario, AppError> {
        let system = self.system()?;
        let dims = system.dims();
        let initial_state = match &self.initial_state {
            Some(x) => Vector::from_row_slice(x),
            None => Vector::zeros(dims.n),
        };
        Ok(Scenario {
            controller: self.controller(dims),
            noise: self.noise(dims)?,
            fault: self.fault(dims)?,
            initial_state,
            horizon: self.horizon,
            system,
        })
    }

    pub fn filter_kind(&self, dims: Dimensions) -> Result<FilterKind, AppError> {
        let f = &self.filter;
        Ok(match f.kind {
            FilterName::Kalman => FilterKind::Kalman,
            FilterName::Hinf => {
                let weight = match &f.weight {
                    Some(s) => s.to_schedule("filter.weight")?,
                    None => Schedule::identity(dims.n),
                };
                let combination = match &f.combination {
                    Some(l) => l.to_schedule("filter.combination")?,
                    None => Schedule::identity(dims.n),
                };
                FilterKind::HInfinity(HinfConfig::with_weights(f.alpha, weight, combination)?)
            }
        })
    }

    pub fn initial_filter_state(&self, dims: Dimensions) -> Result<FilterState, AppError> {
        let x0 = match &self.filter.initial_estimate {
            Some(x) => Vector::from_row_slice(x),
            None => Vector::zeros(dims.n),
        };
        let p0 = match &self.filter.initial_covariance {
            Some(rows) => to_matrix(rows, "filter.initial_covariance")?,
            None => Matrix::identity(dims.n, dims.n),
        };
        if x0.len() != dims.n || p0.shape() != (dims.n, dims.n) {
            return Err(AppError::Config(
                "initial filter estimate/covariance has the wrong size".into(),
            ));
        }
        Ok(FilterState::initial(x0, p0, dims.p))
    }

    pub fn detector_config(&self) -> DetectorConfig {
        DetectorConfig {
            window: self.detector.window,
            min_gap: self.detector.min_gap,
            excitation_threshold: self.detector.excitation_threshold,
            threshold: self.detector.tau,
        }
    }

    /// Filters compared by `compare`; defaults to the Kalman filter and an
    /// α sweep `{0, 20, 60}`.
    pub fn compare_entries(&self) -> Vec<CompareEntry> {
        if !self.compare.is_empty() {
            return self.compare.clone();
        }
        let mut entries = vec![CompareEntry {
            name: "kalman".into(),
            filter: FilterName::Kalman,
            alpha: 0.0,
        }];
        entries.extend([0.0, 20.0, 60.0].map(|alpha| CompareEntry {
            name: format!("hinf_alpha_{alpha}"),
            filter: FilterName::Hinf,
            alpha,
        }));
        entries
    }

    /// Copy with the filter replaced.
    pub fn with_filter(&self, kind: FilterName, alpha: f64) -> Self {
        let mut c = self.clone();
        c.filter.kind = kind;
        c.filter.alpha = alpha;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
horizon = 50

[system]
a = [[0.5, 1.0], [0.0, 1.2]]
b = [[0.0], [1.0]]
c = [[1.0, 0.0]]
process_variance = 0.0025
r = [[0.0025]]

[noise]
kind = "paper_random_walk"
seed = 7

[fault]
kind = "impulse"
onset = 20
theta = [1.5, 0.0]

[controller]
kind = "discrete_pi"
kp = 0.209
ki = 0.0011

[filter]
kind = "hinf"
alpha = 60.0
initial_covariance = [[0.0025, 0.0], [0.0, 0.0025]]
"#;

    #[test]
    fn parses_sample() {
        let cfg = ScenarioConfig::from_toml(SAMPLE).unwrap();
        let sc = cfg.scenario().unwrap();
        assert_eq!(sc.system.dims(), Dimensions::new(2, 1, 1, 2).unwrap());
        assert_eq!(sc.horizon, 50);
        assert_eq!(cfg.detector.window, 100);
        assert_eq!(cfg.detector.calibration_factor, 3.0);
        assert!(matches!(
            cfg.filter_kind(sc.system.dims()).unwrap(),
            FilterKind::HInfinity(_)
        ));
    }

    #[test]
    fn benchmark_round_trips_through_toml() {
        let cfg = ScenarioConfig::benchmark(benchmark::SMALL_FAULT, 3);
        let back = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
        let sc = back.scenario().unwrap();
        assert_eq!(sc, benchmark::scenario(benchmark::SMALL_FAULT, 3).unwrap());
    }

    #[test]
    fn tables_parse() {
        let text = SAMPLE.replace(
            "a = [[0.5, 1.0], [0.0, 1.2]]",
            r#"a = { table = { "0" = [[0.5, 1.0], [0.0, 1.2]], "30" = [[0.4, 1.0], [0.0, 1.1]] } }"#,
        );
        let sys = ScenarioConfig::from_toml(&text).unwrap().system().unwrap();
        assert_eq!(sys.matrices_at(29).a[(0, 0)], 0.5);
        assert_eq!(sys.matrices_at(30).a[(0, 0)], 0.4);
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = SAMPLE.replace("horizon = 50", "horizon = 50\nbogus = 1");
        assert!(matches!(
            ScenarioConfig::from_toml(&text),
            Err(AppError::Config(_))
        ));
    }

    #[test]
    fn step_fault_needs_profile() {
        let text = SAMPLE.replace("kind = \"impulse\"", "kind = \"step\"");
        let cfg = ScenarioConfig::from_toml(&text).unwrap();
        assert!(cfg.scenario().is_err());
    }
}
