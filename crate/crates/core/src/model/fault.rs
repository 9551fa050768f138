use alloc::format;

use super::system::Schedule;
use crate::linalg::{Matrix, Vector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultKind {
    None,
    Step,
    Impulse,
}

/// How a fault vector enters the state equation.
///
/// `Step` carries the known profile `Ψ̃_k` (n×m) that is switched on from the
/// onset step onward; `Impulse` acts through the n×n identity at the onset
/// step only.
#[derive(Debug, Clone, PartialEq)]
pub enum FaultProfile {
    Step(Schedule),
    Impulse { n: usize },
}

impl FaultProfile {
    pub fn rows(&self) -> usize {
        match self {
            FaultProfile::Step(s) => s.at(0).nrows(),
            FaultProfile::Impulse { n } => *n,
        }
    }

    pub fn columns(&self) -> usize {
        match self {
            FaultProfile::Step(s) => s.at(0).ncols(),
            FaultProfile::Impulse { n } => *n,
        }
    }

    /// `Ψ_k(r)`: the profile seen at step `k` by a fault with onset `r`.
    pub fn at(&self, onset: usize, k: usize) -> Matrix {
        match self {
            FaultProfile::Step(s) if k >= onset => s.at(k).clone(),
            FaultProfile::Impulse { n } if k == onset => Matrix::identity(*n, *n),
            _ => Matrix::zeros(self.rows(), self.columns()),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if let FaultProfile::Step(s) = self {
            let (n, m) = s.at(0).shape();
            s.check_shape("fault profile", n, m)?;
        }
        Ok(())
    }
}

/// An additive fault `Ψ_k(r) θ` with constant `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultModel {
    pub kind: FaultKind,
    pub profile: FaultProfile,
    pub onset: usize,
    pub theta: Vector,
}

impl FaultModel {
    pub fn impulse(onset: usize, theta: Vector) -> Self {
        Self {
            kind: FaultKind::Impulse,
            profile: FaultProfile::Impulse { n: theta.len() },
            onset,
            theta,
        }
    }

    pub fn step(profile: Schedule, onset: usize, theta: Vector) -> Result<Self> {
        let profile = FaultProfile::Step(profile);
        profile.validate()?;
        if profile.columns() != theta.len() {
            return Err(Error::dimension(
                "fault vector",
                (profile.columns(), 1),
                (theta.len(), 1),
            ));
        }
        Ok(Self {
            kind: FaultKind::Step,
            profile,
            onset,
            theta,
        })
    }

    /// No fault, but keeps a profile so detectors know the fault shape.
    pub fn none(profile: FaultProfile) -> Self {
        let m = profile.columns();
        Self {
            kind: FaultKind::None,
            profile,
            onset: 0,
            theta: Vector::zeros(m),
        }
    }

    /// The paired fault-free model sharing this model's profile.
    pub fn without_fault(&self) -> Self {
        Self::none(self.profile.clone())
    }

    pub(crate) fn validate(&self, n: usize, m: usize) -> Result<()> {
        self.profile.validate()?;
        if self.profile.rows() != n || self.profile.columns() != m {
            return Err(Error::dimension(
                "fault profile",
                (n, m),
                (self.profile.rows(), self.profile.columns()),
            ));
        }
        if self.theta.len() != m {
            return Err(Error::Config(format!(
                "fault vector has length {}, expected {m}",
                self.theta.len()
            )));
        }
        Ok(())
    }
}

/// `Ψ̃_k·1{k≥r}` for step faults, `δ_{k,r}·I` for impulses, zero otherwise.
pub fn effective_profile(fault: &FaultModel, k: usize) -> Matrix {
    match fault.kind {
        FaultKind::None => Matrix::zeros(fault.profile.rows(), fault.profile.columns()),
        FaultKind::Step | FaultKind::Impulse => fault.profile.at(fault.onset, k),
    }
}
