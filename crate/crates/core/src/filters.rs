//! Kalman and H-infinity measurement updates.
//!
//! Both filters are least-squares estimators. The Kalman update minimises
//! `‖x − x̂_{k|k−1}‖²_{P⁻¹} + ‖y − Cx − Du‖²_{R⁻¹}`; the H-infinity update
//! adds the regularising term `−α‖L(x − x̂_{k|k−1})‖²_S`. The closed-form
//! recursions are the production path. [`RegressionProblem`] solves the same
//! problems through the stacked weighted regression and is kept as an
//! independent route for cross-checks.

use alloc::vec::Vec;

use crate::linalg::{
    check_len, check_shape, cholesky, is_positive_definite, min_eigenvalue, symmetric_eigenvalues,
    symmetrize, Matrix, Vector, CONDITION_LIMIT, PD_TOLERANCE,
};
use crate::model::Schedule;
use crate::{Error, Result};

/// Prior and posterior moments of one filter step.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub step: usize,
    pub x_prior: Vector,
    pub p_prior: Matrix,
    pub x_post: Vector,
    pub p_post: Matrix,
    pub gain: Matrix,
}

impl FilterState {
    /// State before the first measurement: prior `(x0, p0)` at step 0.
    pub fn initial(x0: Vector, p0: Matrix, outputs: usize) -> Self {
        let n = x0.len();
        Self {
            step: 0,
            x_post: x0.clone(),
            p_post: p0.clone(),
            x_prior: x0,
            p_prior: p0,
            gain: Matrix::zeros(n, outputs),
        }
    }
}

/// Performance parameter `α`, error weight `S_k` and combination `L_k`
/// (`z_k = L_k x_k`).
#[derive(Debug, Clone, PartialEq)]
pub struct HinfConfig {
    pub alpha: f64,
    pub weight: Schedule,
    pub combination: Schedule,
}

impl HinfConfig {
    /// `S_k = L_k = I`.
    pub fn new(alpha: f64, n: usize) -> Self {
        Self {
            alpha,
            weight: Schedule::identity(n),
            combination: Schedule::identity(n),
        }
    }

    pub fn with_weights(alpha: f64, weight: Schedule, combination: Schedule) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Config(alloc::format!(
                "alpha must be finite and non-negative, got {alpha}"
            )));
        }
        let rows = combination.at(0).nrows();
        let n = combination.at(0).ncols();
        combination.check_shape("L", rows, n)?;
        weight.check_shape("S", rows, rows)?;
        for s in weight.entries() {
            if (s - s.transpose()).amax() > 1e-12 * s.amax().max(1.0)
                || !is_positive_definite(s, PD_TOLERANCE)
            {
                return Err(Error::Config(
                    "S must be symmetric positive definite".into(),
                ));
            }
        }
        for l in combination.entries() {
            if l.rank(1e-10) < rows.min(n) {
                return Err(Error::Config("L must have full rank".into()));
            }
        }
        Ok(Self {
            alpha,
            weight,
            combination,
        })
    }

    /// `α L_kᵀ S_k L_k`.
    fn penalty(&self, k: usize) -> Matrix {
        let l = self.combination.at(k);
        l.transpose() * self.weight.at(k) * l * self.alpha
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FilterKind {
    Kalman,
    HInfinity(HinfConfig),
}

impl FilterKind {
    pub fn alpha(&self) -> f64 {
        match self {
            FilterKind::Kalman => 0.0,
            FilterKind::HInfinity(cfg) => cfg.alpha,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FilterKind::Kalman => "kalman",
            FilterKind::HInfinity(_) => "hinf",
        }
    }

    pub fn update(
        &self,
        state: &FilterState,
        y: &Vector,
        c: &Matrix,
        d: &Matrix,
        r: &Matrix,
        u: &Vector,
    ) -> Result<FilterState> {
        match self {
            FilterKind::Kalman => kf_update(state, y, c, d, r, u),
            FilterKind::HInfinity(cfg) => hinf_update(state, cfg, y, c, d, r, u),
        }
    }
}

fn check_update_shapes(
    state: &FilterState,
    y: &Vector,
    c: &Matrix,
    d: &Matrix,
    r: &Matrix,
    u: &Vector,
) -> Result<()> {
    let n = state.x_prior.len();
    let p = y.len();
    check_shape("P_prior", &state.p_prior, n, n)?;
    check_shape("C", c, p, n)?;
    check_shape("D", d, p, u.len())?;
    check_shape("R", r, p, p)
}

fn spd_inverse(m: &Matrix, step: usize, what: &'static str) -> Result<Matrix> {
    cholesky(m)
        .map(|c| c.inverse())
        .ok_or(Error::Numerical { step, what })
}

/// Kalman measurement update with gain `K = P Cᵀ (C P Cᵀ + R)⁻¹`.
pub fn kf_update(
    state: &FilterState,
    y: &Vector,
    c: &Matrix,
    d: &Matrix,
    r: &Matrix,
    u: &Vector,
) -> Result<FilterState> {
    check_update_shapes(state, y, c, d, r, u)?;
    let step = state.step;
    let p = &state.p_prior;
    let innovation = y - c * &state.x_prior - d * u;
    let sigma = c * p * c.transpose() + r;
    let chol = cholesky(&sigma).ok_or(Error::Numerical {
        step,
        what: "innovation covariance",
    })?;
    // Kᵀ = Σ⁻¹ C P since P and Σ are symmetric.
    let gain = chol.solve(&(c * p)).transpose();
    let n = p.nrows();
    let p_post = symmetrize(&((Matrix::identity(n, n) - &gain * c) * p));
    Ok(FilterState {
        step,
        x_post: &state.x_prior + &gain * innovation,
        p_post,
        gain,
        x_prior: state.x_prior.clone(),
        p_prior: state.p_prior.clone(),
    })
}

/// `P_{k|k−1}⁻¹ − α L_kᵀ S_k L_k + C_kᵀ R_k⁻¹ C_k` and `R_k⁻¹`.
fn hinf_information(
    p_prior: &Matrix,
    cfg: &HinfConfig,
    step: usize,
    c: &Matrix,
    r: &Matrix,
) -> Result<(Matrix, Matrix)> {
    let p_inv = spd_inverse(p_prior, step, "prior covariance")?;
    let r_inv = spd_inverse(r, step, "measurement covariance")?;
    let info = symmetrize(&(p_inv - cfg.penalty(step) + c.transpose() * &r_inv * c));
    Ok((info, r_inv))
}

/// True iff the H-infinity information matrix is positive definite, i.e. the
/// update at step `k` exists.
pub fn hinf_feasible(p_prior: &Matrix, cfg: &HinfConfig, k: usize, c: &Matrix, r: &Matrix) -> bool {
    match hinf_information(p_prior, cfg, k, c, r) {
        Ok((info, _)) => min_eigenvalue(&info) > PD_TOLERANCE,
        Err(_) => false,
    }
}

/// H-infinity measurement update:
/// `P_{k|k} = (P⁻¹ − αLᵀSL + CᵀR⁻¹C)⁻¹`, `K = P_{k|k} Cᵀ R⁻¹`.
pub fn hinf_update(
    state: &FilterState,
    cfg: &HinfConfig,
    y: &Vector,
    c: &Matrix,
    d: &Matrix,
    r: &Matrix,
    u: &Vector,
) -> Result<FilterState> {
    check_update_shapes(state, y, c, d, r, u)?;
    let step = state.step;
    let (info, r_inv) = hinf_information(&state.p_prior, cfg, step, c, r)?;
    let eig = symmetric_eigenvalues(&info);
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= PD_TOLERANCE {
        return Err(Error::Infeasible {
            step,
            alpha: cfg.alpha,
            min_eigenvalue: lo,
        });
    }
    if hi / lo > CONDITION_LIMIT {
        log::warn!(
            "H-infinity information matrix at step {step} has condition number {:e}",
            hi / lo
        );
    }
    let p_post = info
        .full_piv_lu()
        .try_inverse()
        .map(|m| symmetrize(&m))
        .ok_or(Error::Numerical {
            step,
            what: "H-infinity information matrix",
        })?;
    let gain = &p_post * c.transpose() * r_inv;
    let innovation = y - c * &state.x_prior - d * u;
    Ok(FilterState {
        step,
        x_post: &state.x_prior + &gain * innovation,
        p_post,
        gain,
        x_prior: state.x_prior.clone(),
        p_prior: state.p_prior.clone(),
    })
}

/// Time update `x̂_{k+1|k} = A x̂_{k|k} + B u`, `P_{k+1|k} = A P_{k|k} Aᵀ + Q`.
pub fn predict(
    state: &FilterState,
    a: &Matrix,
    b: &Matrix,
    q: &Matrix,
    u: &Vector,
) -> Result<FilterState> {
    let n = state.x_post.len();
    check_shape("A", a, n, n)?;
    check_shape("B", b, n, u.len())?;
    check_shape("Q", q, n, n)?;
    Ok(FilterState {
        step: state.step + 1,
        x_prior: a * &state.x_post + b * u,
        p_prior: symmetrize(&(a * &state.p_post * a.transpose() + q)),
        x_post: state.x_post.clone(),
        p_post: state.p_post.clone(),
        gain: state.gain.clone(),
    })
}

/// Stacked regression `m = H x + e` with block-diagonal weight
/// `W = diag(blocks)`, possibly indefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    pub observations: Vector,
    pub design: Matrix,
    pub weight_blocks: Vec<Matrix>,
    /// Reported in infeasibility errors; zero for the Kalman problem.
    pub alpha: f64,
    pub step: usize,
}

impl RegressionProblem {
    /// `m = [x̂; y − Du]`, `H = [I; C]`, `W = diag(P, R)`.
    pub fn kalman(
        state: &FilterState,
        y: &Vector,
        c: &Matrix,
        d: &Matrix,
        r: &Matrix,
        u: &Vector,
    ) -> Result<Self> {
        check_update_shapes(state, y, c, d, r, u)?;
        let n = state.x_prior.len();
        let mut observations = Vector::zeros(n + y.len());
        observations.rows_mut(0, n).copy_from(&state.x_prior);
        observations.rows_mut(n, y.len()).copy_from(&(y - d * u));
        let mut design = Matrix::zeros(n + y.len(), n);
        design.view_mut((0, 0), (n, n)).fill_with_identity();
        design.view_mut((n, 0), (y.len(), n)).copy_from(c);
        Ok(Self {
            observations,
            design,
            weight_blocks: alloc::vec![state.p_prior.clone(), r.clone()],
            alpha: 0.0,
            step: state.step,
        })
    }

    /// `m = [x̂; L x̂; y − Du]`, `H = [I; L; C]`,
    /// `W = diag(P, −(1/α) S⁻¹, R)`. With `α = 0` the middle block drops out
    /// and this is the Kalman problem.
    pub fn hinf(
        state: &FilterState,
        cfg: &HinfConfig,
        y: &Vector,
        c: &Matrix,
        d: &Matrix,
        r: &Matrix,
        u: &Vector,
    ) -> Result<Self> {
        let mut problem = Self::kalman(state, y, c, d, r, u)?;
        problem.alpha = cfg.alpha;
        if cfg.alpha == 0.0 {
            return Ok(problem);
        }
        let step = state.step;
        let l = cfg.combination.at(step);
        let s = cfg.weight.at(step);
        check_shape("L", l, l.nrows(), state.x_prior.len())?;
        let n = state.x_prior.len();
        let z = l.nrows();
        let p = y.len();

        let mut observations = Vector::zeros(n + z + p);
        observations
            .rows_mut(0, n)
            .copy_from(&problem.observations.rows(0, n));
        observations.rows_mut(n, z).copy_from(&(l * &state.x_prior));
        observations
            .rows_mut(n + z, p)
            .copy_from(&problem.observations.rows(n, p));
        let mut design = Matrix::zeros(n + z + p, n);
        design.view_mut((0, 0), (n, n)).fill_with_identity();
        design.view_mut((n, 0), (z, n)).copy_from(l);
        design.view_mut((n + z, 0), (p, n)).copy_from(c);
        let middle = -spd_inverse(s, step, "S")? / cfg.alpha;
        problem.observations = observations;
        problem.design = design;
        problem.weight_blocks = alloc::vec![state.p_prior.clone(), middle, r.clone()];
        Ok(problem)
    }

    /// The full block-diagonal weight matrix.
    pub fn weight(&self) -> Matrix {
        let size = self.weight_blocks.iter().map(|b| b.nrows()).sum();
        let mut w = Matrix::zeros(size, size);
        let mut at = 0;
        for b in &self.weight_blocks {
            w.view_mut((at, at), b.shape()).copy_from(b);
            at += b.nrows();
        }
        w
    }
}

/// `x̂ = (HᵀW⁻¹H)⁻¹ HᵀW⁻¹ m` and `P = (HᵀW⁻¹H)⁻¹`.
pub fn solve_weighted_regression(problem: &RegressionProblem) -> Result<(Vector, Matrix)> {
    let step = problem.step;
    let rows = problem.design.nrows();
    check_len("regression observations", &problem.observations, rows)?;
    let mut w_inv = Matrix::zeros(rows, rows);
    let mut at = 0;
    for block in &problem.weight_blocks {
        let inv = block
            .clone()
            .full_piv_lu()
            .try_inverse()
            .ok_or(Error::Numerical {
                step,
                what: "regression weight block",
            })?;
        w_inv.view_mut((at, at), block.shape()).copy_from(&inv);
        at += block.nrows();
    }
    if at != rows {
        return Err(Error::dimension(
            "regression weight",
            (rows, rows),
            (at, at),
        ));
    }
    let ht_w_inv = problem.design.transpose() * w_inv;
    let normal = symmetrize(&(&ht_w_inv * &problem.design));
    let lo = min_eigenvalue(&normal);
    if lo <= PD_TOLERANCE {
        return Err(Error::Infeasible {
            step,
            alpha: problem.alpha,
            min_eigenvalue: lo,
        });
    }
    let chol = cholesky(&normal).ok_or(Error::Numerical {
        step,
        what: "regression normal matrix",
    })?;
    let estimate = chol.solve(&(ht_w_inv * &problem.observations));
    Ok((estimate, symmetrize(&chol.inverse())))
}
