use alloc::collections::BTreeMap;
use alloc::format;

use crate::linalg::{check_shape, min_eigenvalue, Matrix, PD_TOLERANCE};
use crate::{Error, Result};

/// State, input, output and fault-vector sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dimensions {
    pub n: usize,
    pub l: usize,
    pub p: usize,
    pub m: usize,
}

impl Dimensions {
    pub fn new(n: usize, l: usize, p: usize, m: usize) -> Result<Self> {
        if n == 0 || p == 0 || m == 0 {
            return Err(Error::Config(format!(
                "state, output and fault sizes must be positive (n={n}, p={p}, m={m})"
            )));
        }
        if m > n {
            return Err(Error::Config(format!(
                "fault size m={m} exceeds state size n={n}"
            )));
        }
        Ok(Self { n, l, p, m })
    }
}

/// A matrix that is either constant or given as a table keyed by step.
///
/// A table entry at key `k0` applies to every step `k >= k0` up to the next
/// key. Tables must contain key 0.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Constant(Matrix),
    Table(BTreeMap<usize, Matrix>),
}

impl Schedule {
    pub fn table(entries: BTreeMap<usize, Matrix>) -> Result<Self> {
        if !entries.contains_key(&0) {
            return Err(Error::Config("per-step table must define step 0".into()));
        }
        Ok(Schedule::Table(entries))
    }

    pub fn identity(n: usize) -> Self {
        Schedule::Constant(Matrix::identity(n, n))
    }

    pub fn at(&self, k: usize) -> &Matrix {
        match self {
            Schedule::Constant(m) => m,
            Schedule::Table(t) => t
                .range(..=k)
                .next_back()
                .map(|(_, m)| m)
                .expect("table validated to contain step 0"),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = &Matrix> {
        let (constant, table) = match self {
            Schedule::Constant(m) => (Some(m), None),
            Schedule::Table(t) => (None, Some(t.values())),
        };
        constant.into_iter().chain(table.into_iter().flatten())
    }

    pub(crate) fn check_shape(
        &self,
        context: &'static str,
        rows: usize,
        cols: usize,
    ) -> Result<()> {
        self.entries()
            .try_for_each(|m| check_shape(context, m, rows, cols))
    }
}

impl From<Matrix> for Schedule {
    fn from(m: Matrix) -> Self {
        Schedule::Constant(m)
    }
}

/// Borrowed system matrices for one step.
#[derive(Debug, Clone, Copy)]
pub struct StepMatrices<'a> {
    pub a: &'a Matrix,
    pub b: &'a Matrix,
    pub c: &'a Matrix,
    pub d: &'a Matrix,
    pub q: &'a Matrix,
    pub r: &'a Matrix,
}

/// Discrete linear time-varying plant
/// `x_{k+1} = A_k x_k + B_k u_k + w_k`, `y_k = C_k x_k + D_k u_k + v_k`
/// with noise covariances `Q_k`, `R_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtvSystem {
    dims: Dimensions,
    a: Schedule,
    b: Schedule,
    c: Schedule,
    d: Schedule,
    q: Schedule,
    r: Schedule,
}

impl LtvSystem {
    /// Validates every scheduled matrix against `dims`. Covariances must be
    /// symmetric positive semidefinite; filters additionally require `R_k`
    /// to be invertible when they use it.
    pub fn new(
        dims: Dimensions,
        a: Schedule,
        b: Schedule,
        c: Schedule,
        d: Schedule,
        q: Schedule,
        r: Schedule,
    ) -> Result<Self> {
        let Dimensions { n, l, p, .. } = dims;
        a.check_shape("A", n, n)?;
        b.check_shape("B", n, l)?;
        c.check_shape("C", p, n)?;
        d.check_shape("D", p, l)?;
        q.check_shape("Q", n, n)?;
        r.check_shape("R", p, p)?;
        for (name, cov) in [("Q", &q), ("R", &r)] {
            for m in cov.entries() {
                let asym = (m - m.transpose()).amax();
                if asym > 1e-12 * m.amax().max(1.0) {
                    return Err(Error::Config(format!("{name} is not symmetric")));
                }
                if min_eigenvalue(m) < -PD_TOLERANCE * m.amax().max(1.0) {
                    return Err(Error::Config(format!(
                        "{name} is not positive semidefinite"
                    )));
                }
            }
        }
        Ok(Self {
            dims,
            a,
            b,
            c,
            d,
            q,
            r,
        })
    }

    pub fn dims(&self) -> Dimensions {
        self.dims
    }

    pub fn matrices_at(&self, k: usize) -> StepMatrices<'_> {
        StepMatrices {
            a: self.a.at(k),
            b: self.b.at(k),
            c: self.c.at(k),
            d: self.d.at(k),
            q: self.q.at(k),
            r: self.r.at(k),
        }
    }

    /// Returns a copy with every process-noise covariance replaced.
    pub fn with_process_covariance(&self, q: Schedule) -> Result<Self> {
        Self::new(
            self.dims,
            self.a.clone(),
            self.b.clone(),
            self.c.clone(),
            self.d.clone(),
            q,
            self.r.clone(),
        )
    }

    pub(crate) fn has_feedthrough(&self) -> bool {
        self.d.entries().any(|d| d.amax() != 0.0)
    }
}
