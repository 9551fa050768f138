//! Fault-effect tracking on filter innovations.
//!
//! An additive fault `Ψ_k θ` shifts the innovation of any linear filter by
//! `C_k Γ_k θ`, where `Γ_{k+1} = A_k (I − K_k C_k) Γ_k + Ψ_k`. Accumulating
//! `E_k = Σ Γ_jᵀ C_jᵀ Σ_j⁻¹ C_j Γ_j` and `d_k = Σ Γ_jᵀ C_jᵀ Σ_j⁻¹ ε_j` gives the
//! least-squares fault estimate `θ̂_k = E_k⁻¹ d_k` and the generalized
//! innovation ratio `h_k = d_kᵀ E_k⁻¹ d_k`. With an unknown onset one
//! tracker per candidate onset `r` is kept and `h_k(r)` is maximised.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::linalg::{
    check_len, check_shape, cholesky, spd_condition, symmetric_eigenvalues, symmetrize, Matrix,
    Vector, CONDITION_LIMIT,
};
use crate::model::FaultProfile;
use crate::{Error, Result};

/// `ε_k` and its covariance `Σ_k` at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationRecord {
    pub step: usize,
    pub epsilon: Vector,
    pub sigma: Matrix,
}

/// `ε_k = y_k − C_k x̂_{k|k−1} − D_k u_k`.
pub fn innovation(
    y: &Vector,
    x_prior: &Vector,
    c: &Matrix,
    d: &Matrix,
    u: &Vector,
) -> Result<Vector> {
    check_shape("C", c, y.len(), x_prior.len())?;
    check_shape("D", d, y.len(), u.len())?;
    Ok(y - c * x_prior - d * u)
}

/// `Σ_k = C_k P_{k|k−1} C_kᵀ + R_k`.
pub fn innovation_covariance(c: &Matrix, p_prior: &Matrix, r: &Matrix) -> Matrix {
    symmetrize(&(c * p_prior * c.transpose() + r))
}

/// Per-step quantities shared by every tracker: `CᵀΣ⁻¹C` and `CᵀΣ⁻¹ε`.
#[derive(Debug, Clone)]
pub struct InnovationWeights {
    info: Matrix,
    score: Vector,
}

impl InnovationWeights {
    pub fn new(c: &Matrix, sigma: &Matrix, epsilon: &Vector, step: usize) -> Result<Self> {
        check_shape("Sigma", sigma, c.nrows(), c.nrows())?;
        check_len("innovation", epsilon, c.nrows())?;
        let chol = cholesky(sigma).ok_or(Error::Numerical {
            step,
            what: "innovation covariance",
        })?;
        let sigma_inv_c = chol.solve(c);
        Ok(Self {
            info: symmetrize(&(c.transpose() * &sigma_inv_c)),
            score: sigma_inv_c.transpose() * epsilon,
        })
    }
}

/// Least-squares fault fit for one tracker.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultFit {
    pub theta: Vector,
    pub h: f64,
}

/// `Γ_k(r)` together with the running sums `E_k(r)` and `d_k(r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaTracker {
    pub onset: usize,
    pub gamma: Matrix,
    pub info: Matrix,
    pub score: Vector,
    excitation: VecDeque<Matrix>,
    excitation_window: usize,
}

impl GammaTracker {
    /// Fresh tracker with `Γ = 0`, `E = 0`, `d = 0`.
    pub fn new(onset: usize, n: usize, m: usize) -> Self {
        Self {
            onset,
            gamma: Matrix::zeros(n, m),
            info: Matrix::zeros(m, m),
            score: Vector::zeros(m),
            excitation: VecDeque::new(),
            excitation_window: 0,
        }
    }

    /// Keep the last `s` increments of `E` for the persistent-excitation test.
    pub fn with_excitation_window(mut self, s: usize) -> Self {
        self.excitation_window = s;
        self
    }

    /// `Γ ← A (I − K C) Γ + Ψ`.
    pub fn gamma_step(&mut self, a: &Matrix, gain: &Matrix, c: &Matrix, psi: &Matrix) {
        let n = a.nrows();
        let transfer = a * (Matrix::identity(n, n) - gain * c);
        self.propagate(&transfer, psi);
    }

    /// `Γ ← transfer · Γ + Ψ` with a precomputed `A (I − K C)`.
    pub fn propagate(&mut self, transfer: &Matrix, psi: &Matrix) {
        self.gamma = transfer * &self.gamma + psi;
    }

    /// `E += ΓᵀCᵀΣ⁻¹CΓ`, `d += ΓᵀCᵀΣ⁻¹ε`.
    pub fn accumulate(&mut self, c: &Matrix, sigma: &Matrix, epsilon: &Vector) -> Result<()> {
        let weights = InnovationWeights::new(c, sigma, epsilon, self.onset)?;
        self.accumulate_weighted(&weights);
        Ok(())
    }

    pub fn accumulate_weighted(&mut self, weights: &InnovationWeights) {
        let gamma_t = self.gamma.transpose();
        let increment = symmetrize(&(&gamma_t * &weights.info * &self.gamma));
        self.info += &increment;
        self.score += gamma_t * &weights.score;
        if self.excitation_window > 0 {
            if self.excitation.len() == self.excitation_window {
                self.excitation.pop_front();
            }
            self.excitation.push_back(increment);
        }
    }

    fn checked_info(&self) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        let condition = spd_condition(&self.info);
        if condition.is_nan() || condition > CONDITION_LIMIT {
            return Err(Error::NotIdentifiable {
                onset: self.onset,
                condition,
            });
        }
        cholesky(&self.info).ok_or(Error::NotIdentifiable {
            onset: self.onset,
            condition,
        })
    }

    /// `θ̂ = E⁻¹ d` and `h = dᵀ E⁻¹ d`.
    pub fn fit(&self) -> Result<FaultFit> {
        let chol = self.checked_info()?;
        let theta = chol.solve(&self.score);
        // h = ‖L⁻¹ d‖², non-negative by construction
        let whitened = chol
            .l()
            .solve_lower_triangular(&self.score)
            .expect("Cholesky factor has a positive diagonal");
        Ok(FaultFit {
            theta,
            h: whitened.norm_squared(),
        })
    }

    pub fn estimate_theta(&self) -> Result<Vector> {
        self.fit().map(|f| f.theta)
    }

    pub fn gir(&self) -> Result<f64> {
        self.fit().map(|f| f.h)
    }

    /// Sum of the last `s` increments of `E`, once `s` steps are available.
    pub fn windowed_excitation(&self) -> Option<Matrix> {
        if self.excitation_window == 0 || self.excitation.len() < self.excitation_window {
            return None;
        }
        Some(self.excitation.iter().fold(
            Matrix::zeros(self.info.nrows(), self.info.ncols()),
            |acc, m| acc + m,
        ))
    }
}

/// One term of the persistent-excitation sum.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationRecord {
    pub gamma: Matrix,
    pub c: Matrix,
    pub sigma: Matrix,
}

/// True iff `Σ_{j=k−s+1}^{k} Γ_jᵀC_jᵀΣ_j⁻¹C_jΓ_j ≥ γ I` over the last `s`
/// records of `history`.
pub fn persistent_excitation(
    history: &[ExcitationRecord],
    gamma_threshold: f64,
    s: usize,
) -> Result<bool> {
    if s == 0 || gamma_threshold.is_nan() || gamma_threshold <= 0.0 {
        return Err(Error::Config(
            "persistent excitation needs s >= 1 and gamma > 0".into(),
        ));
    }
    if history.len() < s {
        return Err(Error::InsufficientData {
            needed: s,
            available: history.len(),
        });
    }
    let m = history[0].gamma.ncols();
    let mut sum = Matrix::zeros(m, m);
    for (j, rec) in history[history.len() - s..].iter().enumerate() {
        let chol = cholesky(&rec.sigma).ok_or(Error::Numerical {
            step: j,
            what: "innovation covariance",
        })?;
        let cg = &rec.c * &rec.gamma;
        sum += cg.transpose() * chol.solve(&cg);
    }
    Ok(symmetric_eigenvalues(&sum).min() >= gamma_threshold)
}

/// Result of maximising `h_k(r)` over the admissible onset candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct OnsetEstimate {
    pub step: usize,
    pub onset: usize,
    pub h: f64,
    pub theta: Vector,
    /// `(r, h_k(r))` for every identifiable admissible candidate.
    pub candidates: Vec<(usize, f64)>,
    /// Windowed excitation sum of the winning candidate, when available.
    pub excitation: Option<Matrix>,
}

/// `r̂_k = argmax h_k(r)` over `max(1, k − window) ≤ r ≤ k − min_gap`.
///
/// Candidates whose `E_k(r)` is not identifiable are skipped; ties go to the
/// smallest `r`.
pub fn onset_scan<'a>(
    trackers: impl IntoIterator<Item = &'a GammaTracker>,
    k: usize,
    min_gap: usize,
    window: usize,
) -> Result<OnsetEstimate> {
    let lo = k.saturating_sub(window).max(1);
    let hi = k.checked_sub(min_gap);
    let mut best: Option<(&GammaTracker, FaultFit)> = None;
    let mut candidates = Vec::new();
    let mut admissible: Vec<&GammaTracker> = trackers
        .into_iter()
        .filter(|t| hi.is_some_and(|hi| t.onset >= lo && t.onset <= hi))
        .collect();
    admissible.sort_by_key(|t| t.onset);
    for tracker in admissible {
        let fit = match tracker.fit() {
            Ok(fit) => fit,
            Err(Error::NotIdentifiable { .. }) => continue,
            Err(e) => return Err(e),
        };
        candidates.push((tracker.onset, fit.h));
        if best.as_ref().is_none_or(|(_, b)| fit.h > b.h) {
            best = Some((tracker, fit));
        }
    }
    let (tracker, fit) = best.ok_or(Error::NoCandidate { step: k })?;
    Ok(OnsetEstimate {
        step: k,
        onset: tracker.onset,
        h: fit.h,
        theta: fit.theta,
        candidates,
        excitation: tracker.windowed_excitation(),
    })
}

/// Bank of trackers, one per onset candidate inside the search window.
#[derive(Debug, Clone)]
pub struct OnsetScanner {
    profile: FaultProfile,
    window: usize,
    min_gap: usize,
    trackers: VecDeque<GammaTracker>,
}

impl OnsetScanner {
    pub fn new(profile: FaultProfile, window: usize, min_gap: usize) -> Result<Self> {
        if window == 0 || min_gap > window {
            return Err(Error::Config(alloc::format!(
                "search window {window} must be positive and not smaller than the minimum gap {min_gap}"
            )));
        }
        Ok(Self {
            profile,
            window,
            min_gap,
            trackers: VecDeque::new(),
        })
    }

    pub fn trackers(&self) -> impl Iterator<Item = &GammaTracker> {
        self.trackers.iter()
    }

    pub fn tracker(&self, onset: usize) -> Option<&GammaTracker> {
        self.trackers.iter().find(|t| t.onset == onset)
    }

    /// Consumes step `k` and returns the onset estimate for that step, if
    /// any candidate is admissible. `transfer` is `A_k (I − K_k C_k)` for
    /// the gain actually used at step `k`.
    pub fn observe(
        &mut self,
        k: usize,
        transfer: &Matrix,
        weights: &InnovationWeights,
    ) -> Result<Option<OnsetEstimate>> {
        for t in self.trackers.iter_mut() {
            t.accumulate_weighted(weights);
        }
        let estimate = match onset_scan(self.trackers.iter(), k, self.min_gap, self.window) {
            Ok(e) => Some(e),
            Err(Error::NoCandidate { .. }) => None,
            Err(e) => return Err(e),
        };
        // candidates with r < k + 1 − window can never be admissible again
        let oldest = (k + 1).saturating_sub(self.window);
        while self.trackers.front().is_some_and(|t| t.onset < oldest) {
            self.trackers.pop_front();
        }
        self.trackers.push_back(
            GammaTracker::new(k, self.profile.rows(), self.profile.columns())
                .with_excitation_window(self.min_gap),
        );
        for t in self.trackers.iter_mut() {
            let psi = self.profile.at(t.onset, k);
            t.propagate(transfer, &psi);
        }
        Ok(estimate)
    }
}

/// Thresholded statistic and the steps that raised an alarm.
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholded {
    pub series: Vec<f64>,
    pub alarms: Vec<usize>,
}

/// Values below `tau` become zero; steps with `h_k ≥ tau` and `h_k > 0` alarm.
pub fn threshold_alarms(h: &[f64], tau: f64) -> Thresholded {
    let mut alarms = Vec::new();
    let series = h
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            if v >= tau && v > 0.0 {
                alarms.push(k);
                v
            } else {
                0.0
            }
        })
        .collect();
    Thresholded { series, alarms }
}

/// One step of the fault-fit cost: `ε_j`, `C_j Γ_j` and `Σ_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTerm {
    pub epsilon: Vector,
    pub c_gamma: Matrix,
    pub sigma: Matrix,
}

fn weighted_norm(v: &Vector, sigma: &Matrix) -> f64 {
    let chol = cholesky(sigma).expect("innovation covariance must be positive definite");
    v.dot(&chol.solve(v))
}

/// `J(θ) = Σ_j ‖ε_j − C_jΓ_jθ‖²_{Σ_j⁻¹}`.
pub fn fit_cost(terms: &[FitTerm], theta: &Vector) -> f64 {
    terms
        .iter()
        .map(|t| weighted_norm(&(&t.epsilon - &t.c_gamma * theta), &t.sigma))
        .sum()
}

/// `e · ln(Σ‖ε_j‖² / J(θ))`, the ratio form of the innovation statistic.
///
/// This is not algebraically equal to `dᵀE⁻¹d` and is reported for
/// diagnostics only.
pub fn log_ratio_diagnostic(terms: &[FitTerm], theta: &Vector) -> f64 {
    let raw: f64 = terms
        .iter()
        .map(|t| weighted_norm(&t.epsilon, &t.sigma))
        .sum();
    core::f64::consts::E * libm::log(raw / fit_cost(terms, theta))
}
