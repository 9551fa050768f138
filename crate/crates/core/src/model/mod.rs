//! LTV plant models, additive faults, noise, control and forward simulation.

mod controller;
mod fault;
mod noise;
mod simulate;
mod system;

pub use controller::{control_step, Controller};
pub use fault::{effective_profile, FaultKind, FaultModel, FaultProfile};
pub use noise::{draw_noise, NoiseKind, NoiseModel, NoiseSource};
pub use simulate::{measure, simulate, step_state, Scenario, SimulationTrace};
pub use system::{Dimensions, LtvSystem, Schedule, StepMatrices};
