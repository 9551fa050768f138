use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::system::{Dimensions, LtvSystem};
use crate::linalg::{check_shape, psd_factor, Matrix, Vector};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    /// `w_k ~ N(0, Q_k)`, `v_k ~ N(0, R_k)`, independent.
    Gaussian,
    /// `v_k ~ N(0, R_k)` and `w_k = w_{k-1} + coupling·v_k` with `w_{-1} = 0`.
    ///
    /// `coupling` is n×p. With `independent_driver` the walk is driven by a
    /// second, independent draw from `N(0, R_k)` instead of the measurement
    /// noise itself.
    RandomWalk {
        coupling: Matrix,
        independent_driver: bool,
    },
    /// Noise-free runs.
    Zero,
}

impl NoiseKind {
    /// Random walk driven by the measurement noise through an all-ones
    /// coupling.
    pub fn random_walk(dims: Dimensions) -> Self {
        NoiseKind::RandomWalk {
            coupling: Matrix::from_element(dims.n, dims.p, 1.0),
            independent_driver: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, seed: u64) -> Self {
        Self { kind, seed }
    }
}

/// Seeded generator for `(w_k, v_k)` pairs. Identical seeds give
/// bit-identical sequences.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    kind: NoiseKind,
    rng: ChaCha8Rng,
    walk: Vector,
    dims: Dimensions,
}

impl NoiseSource {
    pub fn new(model: &NoiseModel, dims: Dimensions) -> Result<Self> {
        if let NoiseKind::RandomWalk { coupling, .. } = &model.kind {
            check_shape("noise coupling", coupling, dims.n, dims.p)?;
        }
        Ok(Self {
            kind: model.kind.clone(),
            rng: ChaCha8Rng::seed_from_u64(model.seed),
            walk: Vector::zeros(dims.n),
            dims,
        })
    }

    fn standard_normal(&mut self, len: usize) -> Vector {
        Vector::from_fn(len, |_, _| self.rng.sample(StandardNormal))
    }

    /// Draws the process and measurement noise for step `k`.
    pub fn draw(&mut self, system: &LtvSystem, k: usize) -> Result<(Vector, Vector)> {
        let mats = system.matrices_at(k);
        let Dimensions { n, p, .. } = self.dims;
        match &self.kind {
            NoiseKind::Zero => Ok((Vector::zeros(n), Vector::zeros(p))),
            NoiseKind::Gaussian => {
                let wf = psd_factor(mats.q, k, "Q")?;
                let vf = psd_factor(mats.r, k, "R")?;
                let w = wf * self.standard_normal(n);
                let v = vf * self.standard_normal(p);
                Ok((w, v))
            }
            NoiseKind::RandomWalk {
                coupling,
                independent_driver,
            } => {
                let (coupling, independent) = (coupling.clone(), *independent_driver);
                let vf = psd_factor(mats.r, k, "R")?;
                let v = &vf * self.standard_normal(p);
                let driver = if independent {
                    &vf * self.standard_normal(p)
                } else {
                    v.clone()
                };
                self.walk += coupling * driver;
                Ok((self.walk.clone(), v))
            }
        }
    }
}

/// One draw from `source` at step `k`.
pub fn draw_noise(
    source: &mut NoiseSource,
    system: &LtvSystem,
    k: usize,
) -> Result<(Vector, Vector)> {
    source.draw(system, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Schedule;
    use std::vec::Vec;

    fn scalar_obs_system(q: f64, r: f64) -> LtvSystem {
        let dims = Dimensions::new(2, 0, 1, 2).unwrap();
        LtvSystem::new(
            dims,
            Schedule::identity(2),
            Matrix::zeros(2, 0).into(),
            Matrix::from_row_slice(1, 2, &[1.0, 0.0]).into(),
            Matrix::zeros(1, 0).into(),
            (Matrix::identity(2, 2) * q).into(),
            Matrix::from_element(1, 1, r).into(),
        )
        .unwrap()
    }

    #[test]
    fn degenerate_gaussian_is_zero() {
        let sys = scalar_obs_system(0.0, 0.0);
        let mut src =
            NoiseSource::new(&NoiseModel::new(NoiseKind::Gaussian, 3), sys.dims()).unwrap();
        for k in 0..5 {
            let (w, v) = src.draw(&sys, k).unwrap();
            assert_eq!(w, Vector::zeros(2));
            assert_eq!(v, Vector::zeros(1));
        }
    }

    #[test]
    fn random_walk_accumulates_measurement_noise() {
        let sys = scalar_obs_system(0.0025, 0.0025);
        let model = NoiseModel::new(NoiseKind::random_walk(sys.dims()), 11);
        let mut src = NoiseSource::new(&model, sys.dims()).unwrap();
        let mut walk = Vector::zeros(2);
        for k in 0..50 {
            let (w, v) = src.draw(&sys, k).unwrap();
            walk += Vector::from_element(2, v[0]);
            assert!((&w - &walk).amax() < 1e-15);
        }
    }

    #[test]
    fn independent_driver_decouples_walk() {
        let sys = scalar_obs_system(0.0025, 0.0025);
        let kind = NoiseKind::RandomWalk {
            coupling: Matrix::from_element(2, 1, 1.0),
            independent_driver: true,
        };
        let mut src = NoiseSource::new(&NoiseModel::new(kind, 11), sys.dims()).unwrap();
        let (w, v) = src.draw(&sys, 0).unwrap();
        assert_ne!(w[0], v[0]);
        assert_eq!(w[0], w[1]);
    }

    #[test]
    fn same_seed_same_sequence() {
        let sys = scalar_obs_system(0.5, 0.25);
        let model = NoiseModel::new(NoiseKind::Gaussian, 42);
        let draw_all = || {
            let mut src = NoiseSource::new(&model, sys.dims()).unwrap();
            (0..20)
                .map(|k| src.draw(&sys, k).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw_all(), draw_all());
    }

    #[test]
    fn measurement_noise_has_requested_spread() {
        let sys = scalar_obs_system(0.0025, 0.0025);
        let model = NoiseModel::new(NoiseKind::random_walk(sys.dims()), 5);
        let mut src = NoiseSource::new(&model, sys.dims()).unwrap();
        let n = 40_000;
        let samples: Vec<f64> = (0..n).map(|k| src.draw(&sys, k).unwrap().1[0]).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        // standard error of the sample std is about 0.05 / sqrt(2n) = 1.8e-4
        assert!((var.sqrt() - 0.05).abs() < 1e-3, "std {}", var.sqrt());
    }

    #[test]
    fn coupling_shape_is_checked() {
        let sys = scalar_obs_system(0.0, 1.0);
        let kind = NoiseKind::RandomWalk {
            coupling: Matrix::zeros(3, 1),
            independent_driver: false,
        };
        assert!(NoiseSource::new(&NoiseModel::new(kind, 0), sys.dims()).is_err());
    }
}
