//! Independent oracles shared by the integration tests. Nothing here calls
//! the detector recursions; sums and products are formed from scratch.
#![allow(dead_code)]

use ltv_sentinel_core::benchmark;
use ltv_sentinel_core::filters::{FilterKind, FilterState};
use ltv_sentinel_core::model::{FaultProfile, LtvSystem, NoiseKind, Scenario, SimulationTrace};
use ltv_sentinel_core::pipeline::{run_filter_on_trace, FilterRun};
use ltv_sentinel_core::{Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// `G Gᵀ + floor·I`, well conditioned.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> Matrix {
    let g = random_matrix(rng, n, n);
    &g * g.transpose() + Matrix::identity(n, n) * floor
}

/// Dense inverse through LU, deliberately not the Cholesky used in the crate.
pub fn inv(m: &Matrix) -> Matrix {
    m.clone().lu().try_inverse().expect("invertible")
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.amax()
}

/// Benchmark scenario with the given noise kind.
pub fn benchmark_scenario(theta: [f64; 2], seed: u64, noise: Option<NoiseKind>) -> Scenario {
    let mut sc = benchmark::scenario(theta, seed).unwrap();
    if let Some(kind) = noise {
        sc.noise.kind = kind;
    }
    sc
}

pub fn benchmark_filter_run(
    trace: &SimulationTrace,
    system: &LtvSystem,
    filter: &FilterKind,
) -> FilterRun {
    let init: FilterState = benchmark::initial_filter_state(benchmark::DEFAULT_PROCESS_VARIANCE);
    run_filter_on_trace(system, filter, &init, trace).unwrap()
}

/// `A_k (I − K_k C_k)` for every recorded step.
pub fn transfers(system: &LtvSystem, run: &FilterRun) -> Vec<Matrix> {
    run.steps
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let m = system.matrices_at(k);
            let n = m.a.nrows();
            m.a * (Matrix::identity(n, n) - &s.state.gain * m.c)
        })
        .collect()
}

/// `Γ_k(r) = Σ_{j=r}^{k−1} T_{k−1} ⋯ T_{j+1} Ψ_j(r)` as an explicit sum of
/// products.
pub fn batch_gamma(transfers: &[Matrix], profile: &FaultProfile, r: usize, k: usize) -> Matrix {
    let n = profile.rows();
    let mut total = Matrix::zeros(n, profile.columns());
    for j in r..k {
        let psi = profile.at(r, j);
        if psi.iter().all(|&x| x == 0.0) {
            continue;
        }
        let mut phi = Matrix::identity(n, n);
        for t in &transfers[j + 1..k] {
            phi = t * phi;
        }
        total += phi * psi;
    }
    total
}

/// Explicit `(E_k(r), d_k(r))` sums over `j = r+1..=k`, with `Γ_j` from
/// [`batch_gamma`] and `Σ_j⁻¹` from a dense LU inverse.
pub fn batch_sums(
    system: &LtvSystem,
    run: &FilterRun,
    transfers: &[Matrix],
    profile: &FaultProfile,
    r: usize,
    k: usize,
) -> (Matrix, Vector) {
    let m = profile.columns();
    let mut e = Matrix::zeros(m, m);
    let mut d = Vector::zeros(m);
    for j in r + 1..=k {
        let c = system.matrices_at(j).c;
        let rec = &run.steps[j].innovation;
        let cg = c * batch_gamma(transfers, profile, r, j);
        let s_inv = inv(&rec.sigma);
        e += cg.transpose() * &s_inv * &cg;
        d += cg.transpose() * &s_inv * &rec.epsilon;
    }
    (e, d)
}

/// `J(θ) = Σ_j (ε_j − C_jΓ_jθ)ᵀ Σ_j⁻¹ (ε_j − C_jΓ_jθ)` over `j = r+1..=k`.
pub fn batch_cost(
    system: &LtvSystem,
    run: &FilterRun,
    transfers: &[Matrix],
    profile: &FaultProfile,
    r: usize,
    k: usize,
    theta: &Vector,
) -> f64 {
    (r + 1..=k)
        .map(|j| {
            let c = system.matrices_at(j).c;
            let rec = &run.steps[j].innovation;
            let resid = &rec.epsilon - c * batch_gamma(transfers, profile, r, j) * theta;
            (resid.transpose() * inv(&rec.sigma) * &resid)[(0, 0)]
        })
        .sum()
}
