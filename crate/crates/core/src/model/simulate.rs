use alloc::vec::Vec;

use super::controller::Controller;
use super::fault::{effective_profile, FaultModel};
use super::noise::{NoiseModel, NoiseSource};
use super::system::LtvSystem;
use crate::linalg::{check_len, Vector};
use crate::{Error, Result};

/// `A_k x_k + B_k u_k + w_k + Ψ_k(r) θ`.
pub fn step_state(
    system: &LtvSystem,
    fault: &FaultModel,
    k: usize,
    x: &Vector,
    u: &Vector,
    w: &Vector,
) -> Result<Vector> {
    let dims = system.dims();
    check_len("state", x, dims.n)?;
    check_len("input", u, dims.l)?;
    check_len("process noise", w, dims.n)?;
    fault.validate(dims.n, dims.m)?;
    let mats = system.matrices_at(k);
    Ok(mats.a * x + mats.b * u + w + effective_profile(fault, k) * &fault.theta)
}

/// `C_k x_k + D_k u_k + v_k`.
pub fn measure(system: &LtvSystem, k: usize, x: &Vector, u: &Vector, v: &Vector) -> Result<Vector> {
    let dims = system.dims();
    check_len("state", x, dims.n)?;
    check_len("input", u, dims.l)?;
    check_len("measurement noise", v, dims.p)?;
    let mats = system.matrices_at(k);
    Ok(mats.c * x + mats.d * u + v)
}

/// Ground truth of one closed-loop run. `states` holds `x_0..x_N`; the other
/// sequences hold steps `0..N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub states: Vec<Vector>,
    pub inputs: Vec<Vector>,
    pub outputs: Vec<Vector>,
    pub process_noise: Vec<Vector>,
    pub measurement_noise: Vec<Vector>,
    pub fault: FaultModel,
    pub seed: u64,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub system: LtvSystem,
    pub controller: Controller,
    pub noise: NoiseModel,
    pub fault: FaultModel,
    pub initial_state: Vector,
    pub horizon: usize,
}

impl Scenario {
    pub fn simulate(&self) -> Result<SimulationTrace> {
        simulate(
            &self.system,
            &self.controller,
            &self.noise,
            &self.fault,
            &self.initial_state,
            self.horizon,
        )
    }

    pub fn with_fault(&self, fault: FaultModel) -> Self {
        Self {
            fault,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        s.noise.seed = seed;
        s
    }
}

/// Runs the plant for `horizon` steps.
///
/// The controller sees `C_k x_k + v_k`; output feedback combined with a
/// nonzero feedthrough `D_k` would form an algebraic loop and is rejected.
pub fn simulate(
    system: &LtvSystem,
    controller: &Controller,
    noise: &NoiseModel,
    fault: &FaultModel,
    x0: &Vector,
    horizon: usize,
) -> Result<SimulationTrace> {
    let dims = system.dims();
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    if controller.is_active() && system.has_feedthrough() {
        return Err(Error::Config(
            "output feedback with nonzero feedthrough D forms an algebraic loop".into(),
        ));
    }
    if controller.is_active() && dims.l != dims.p {
        return Err(Error::Config(
            "PI controller needs as many inputs as outputs".into(),
        ));
    }
    check_len("initial state", x0, dims.n)?;
    fault.validate(dims.n, dims.m)?;

    let mut controller = controller.clone();
    controller.reset();
    let mut source = NoiseSource::new(noise, dims)?;

    let mut trace = SimulationTrace {
        states: Vec::with_capacity(horizon + 1),
        inputs: Vec::with_capacity(horizon),
        outputs: Vec::with_capacity(horizon),
        process_noise: Vec::with_capacity(horizon),
        measurement_noise: Vec::with_capacity(horizon),
        fault: fault.clone(),
        seed: noise.seed,
    };
    let mut x = x0.clone();
    for k in 0..horizon {
        let (w, v) = source.draw(system, k)?;
        let mats = system.matrices_at(k);
        let u = controller.control_step(&(mats.c * &x + &v))?;
        let y = measure(system, k, &x, &u, &v)?;
        let next = step_state(system, fault, k, &x, &u, &w)?;
        if next.iter().any(|c| !c.is_finite()) {
            return Err(Error::Divergence { step: k + 1 });
        }
        trace.states.push(x);
        trace.inputs.push(u);
        trace.outputs.push(y);
        trace.process_noise.push(w);
        trace.measurement_noise.push(v);
        x = next;
    }
    trace.states.push(x);
    Ok(trace)
}
