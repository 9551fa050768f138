//! The unstable two-state benchmark plant with impulsive faults.
//!
//! `x_{k+1} = [[0.5, 1], [0, 1.2]] x_k + [0, 1]ᵀ u_k + w_k + δ_{k,r} θ`,
//! `y_k = [1, 0] x_k + v_k`, with `v_k ~ N(0, 0.0025)` and process noise
//! `w_k = w_{k-1} + [1, 1]ᵀ v_k`. A PI controller with transfer function
//! `0.209 + 0.0011 / (z - 1)` keeps the loop bounded.

use crate::filters::{FilterKind, FilterState, HinfConfig};
use crate::linalg::{Matrix, Vector};
use crate::model::{
    Controller, Dimensions, FaultModel, LtvSystem, NoiseKind, NoiseModel, Scenario, Schedule,
};
use crate::Result;

pub const MEASUREMENT_VARIANCE: f64 = 0.0025;
pub const PROPORTIONAL_GAIN: f64 = 0.209;
pub const INTEGRAL_GAIN: f64 = 0.0011;
pub const ALPHA: f64 = 60.0;
pub const ONSET: usize = 201;
pub const SEARCH_WINDOW: usize = 100;
pub const HORIZON: usize = 400;
/// Design process-noise level `q` in `Q_k = q·I`.
pub const DEFAULT_PROCESS_VARIANCE: f64 = 0.0025;
pub const LARGE_FAULT: [f64; 2] = [1.5, 0.0];
pub const SMALL_FAULT: [f64; 2] = [0.6, 0.0];

pub fn dims() -> Dimensions {
    Dimensions {
        n: 2,
        l: 1,
        p: 1,
        m: 2,
    }
}

pub fn transition() -> Matrix {
    Matrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, 1.2])
}

pub fn observation() -> Matrix {
    Matrix::from_row_slice(1, 2, &[1.0, 0.0])
}

/// The plant with design covariance `Q = q·I`.
pub fn system(process_variance: f64) -> Result<LtvSystem> {
    LtvSystem::new(
        dims(),
        Schedule::Constant(transition()),
        Schedule::Constant(Matrix::from_row_slice(2, 1, &[0.0, 1.0])),
        Schedule::Constant(observation()),
        Schedule::Constant(Matrix::zeros(1, 1)),
        Schedule::Constant(Matrix::identity(2, 2) * process_variance),
        Schedule::Constant(Matrix::from_element(1, 1, MEASUREMENT_VARIANCE)),
    )
}

pub fn controller() -> Controller {
    Controller::discrete_pi(PROPORTIONAL_GAIN, INTEGRAL_GAIN, 1)
}

pub fn noise(seed: u64) -> NoiseModel {
    NoiseModel::new(NoiseKind::random_walk(dims()), seed)
}

pub fn impulse(theta: [f64; 2]) -> FaultModel {
    FaultModel::impulse(ONSET, Vector::from_row_slice(&theta))
}

pub fn scenario(theta: [f64; 2], seed: u64) -> Result<Scenario> {
    Ok(Scenario {
        system: system(DEFAULT_PROCESS_VARIANCE)?,
        controller: controller(),
        noise: noise(seed),
        fault: impulse(theta),
        initial_state: Vector::zeros(2),
        horizon: HORIZON,
    })
}

pub fn hinf(alpha: f64) -> FilterKind {
    FilterKind::HInfinity(HinfConfig::new(alpha, 2))
}

/// Initial prior `x̂_{0|-1} = 0`, `P_{0|-1} = q·I`.
///
/// With `P_{0|-1} = I` the H-infinity information matrix
/// `P⁻¹ - αI + CᵀR⁻¹C` is indefinite at step 0 for `α = 60`.
pub fn initial_filter_state(process_variance: f64) -> FilterState {
    FilterState::initial(
        Vector::zeros(2),
        Matrix::identity(2, 2) * process_variance,
        1,
    )
}
