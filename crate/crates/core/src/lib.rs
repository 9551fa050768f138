//! Robust fault detection for discrete linear time-varying systems.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! machinery:
//!
//! * [`model`]: LTV state-space systems, additive fault profiles, noise
//!   generation, a discrete PI controller and forward simulation.
//! * [`filters`]: the Kalman filter and the H-infinity filter, both as
//!   closed-form recursions and as weighted linear-regression solutions.
//! * [`detect`]: innovation-based fault-effect tracking, least-squares fault
//!   vector estimation, the generalized innovation ratio and the
//!   unknown-onset scan.
//! * [`pipeline`]: runs a filter over recorded data and drives the detector.
//! * [`benchmark`]: the unstable two-state benchmark plant used by the
//!   experiment harness.
//!
//! IO, configuration files and the command line live in the `ltv-sentinel`
//! companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod benchmark;
pub mod detect;
mod error;
pub mod filters;
pub mod linalg;
pub mod model;
pub mod pipeline;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
