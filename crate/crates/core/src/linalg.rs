//! Small dense-matrix helpers shared by the filters and the detector.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Smallest eigenvalue a matrix must exceed to count as positive definite.
pub const PD_TOLERANCE: f64 = 1e-12;

/// Condition numbers above this are treated as numerically singular.
pub const CONDITION_LIMIT: f64 = 1e12;

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub fn symmetric_eigenvalues(m: &Matrix) -> Vector {
    SymmetricEigen::new(symmetrize(m)).eigenvalues
}

pub fn min_eigenvalue(m: &Matrix) -> f64 {
    symmetric_eigenvalues(m).min()
}

/// True iff the symmetric part of `m` has every eigenvalue above `tol`.
pub fn is_positive_definite(m: &Matrix, tol: f64) -> bool {
    m.is_square() && m.nrows() > 0 && min_eigenvalue(m) > tol
}

/// Spectral condition number of a symmetric matrix; infinite unless PD.
pub fn spd_condition(m: &Matrix) -> f64 {
    let ev = symmetric_eigenvalues(m);
    let (lo, hi) = (ev.min(), ev.max());
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub(crate) fn cholesky(m: &Matrix) -> Option<Cholesky<f64, Dyn>> {
    Cholesky::new(symmetrize(m))
}

/// Symmetric square-root factor `F` with `F Fᵀ = m` for a positive
/// semidefinite `m`. Tiny negative eigenvalues from round-off are clipped.
pub(crate) fn psd_factor(m: &Matrix, step: usize, what: &'static str) -> Result<Matrix> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let scale = eig.eigenvalues.amax().max(1.0);
    if eig.eigenvalues.iter().any(|&l| l < -PD_TOLERANCE * scale) {
        return Err(Error::Factorization { step, what });
    }
    let roots = eig.eigenvalues.map(|l| libm::sqrt(l.max(0.0)));
    Ok(&eig.eigenvectors * Matrix::from_diagonal(&roots))
}

pub(crate) fn check_shape(
    context: &'static str,
    m: &Matrix,
    rows: usize,
    cols: usize,
) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::dimension(context, (rows, cols), m.shape()));
    }
    Ok(())
}

pub(crate) fn check_len(context: &'static str, v: &Vector, len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::dimension(context, (len, 1), (v.len(), 1)));
    }
    Ok(())
}
