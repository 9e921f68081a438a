use std::f64::consts::PI;

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::linalg::LeastSquares;
use crate::tasks::bank::LinearBank;
use crate::theory::posterior::prob_to_dist;

/// Least-squares inversion of a bank: caches `(C^T C)^-1 C^T` and the
/// offset term `(C^T C)^-1 C^T b`.
#[derive(Debug, Clone)]
pub struct Trilaterator {
    ls: LeastSquares,
    offset_term: Array1<f64>,
    n_tasks: usize,
}

impl Trilaterator {
    pub fn new(bank: &LinearBank) -> Result<Self> {
        let ls = LeastSquares::new(bank.normals())?;
        let offset_term = ls.solve(bank.offsets());
        Ok(Self {
            ls,
            offset_term,
            n_tasks: bank.n_tasks(),
        })
    }

    pub fn condition(&self) -> f64 {
        self.ls.condition()
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.n_tasks {
            return Err(Error::DimensionMismatch {
                expected: self.n_tasks,
                got: n,
            });
        }
        Ok(())
    }

    /// Position whose signed distances best match the probabilities `y_hat`.
    pub fn trilaterate(&self, y_hat: &Array1<f64>, t: usize, sigma: f64) -> Result<Array1<f64>> {
        self.check_len(y_hat.len())?;
        let k = y_hat
            .iter()
            .map(|&y| prob_to_dist(y, t, sigma))
            .collect::<Result<Array1<f64>>>()?;
        Ok(self.solve_distances(&k))
    }

    /// Least-squares position with signed distances `k`: `C^+ k + C^+ b`.
    pub fn solve_distances(&self, k: &Array1<f64>) -> Array1<f64> {
        self.ls.solve(k) + &self.offset_term
    }

    /// Linear decode of readouts `z` under `y = tanh(z) / 2 + 1/2`, using
    /// `Phi(u) ~ tanh(pi u / (2 sqrt 3)) / 2 + 1/2`.
    pub fn tanh_decode(&self, z: &Array1<f64>, t: usize, sigma: f64) -> Result<Array1<f64>> {
        self.check_len(z.len())?;
        let scale = tanh_decode_scale(t, sigma);
        Ok(self.ls.solve(z) * scale + &self.offset_term)
    }
}

/// `2 sqrt(3) sigma / (pi sqrt(t))`.
pub fn tanh_decode_scale(t: usize, sigma: f64) -> f64 {
    2.0 * 3f64.sqrt() * sigma / (PI * (t as f64).sqrt())
}

pub fn trilaterate(y_hat: &Array1<f64>, bank: &LinearBank, t: usize, sigma: f64) -> Result<Array1<f64>> {
    Trilaterator::new(bank)?.trilaterate(y_hat, t, sigma)
}

pub fn tanh_decode(z: &Array1<f64>, bank: &LinearBank, t: usize, sigma: f64) -> Result<Array1<f64>> {
    Trilaterator::new(bank)?.tanh_decode(z, t, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::posterior::{class_prob, PosteriorEstimate};
    use ndarray::array;

    #[test]
    fn identity_geometry_returns_distances() {
        let bank = LinearBank::new(ndarray::Array2::eye(2), array![0.0, 0.0]).unwrap();
        let mu = array![0.12, -0.3];
        let y = class_prob(&PosteriorEstimate::new(mu.clone(), 5, 0.3).unwrap(), &bank).unwrap();
        let back = trilaterate(&y, &bank, 5, 0.3).unwrap();
        assert!((&back - &mu).iter().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn rank_deficient_bank_is_reported() {
        let bank = LinearBank::new(array![[1.0, 0.0], [-1.0, 0.0]], array![0.0, 0.1]).unwrap();
        let err = trilaterate(&array![0.3, 0.6], &bank, 1, 0.2).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { rank: 1, dim: 2, .. }));
    }

    #[test]
    fn saturated_probability_is_rejected() {
        let bank = LinearBank::new(ndarray::Array2::eye(2), array![0.0, 0.0]).unwrap();
        assert!(trilaterate(&array![1.0, 0.5], &bank, 1, 0.2).is_err());
    }

    #[test]
    fn tanh_decode_on_its_own_parametrization() {
        let bank = LinearBank::new(
            array![[1.0, 0.0], [0.6, 0.8], [0.0, 1.0], [-0.8, 0.6]],
            array![0.1, -0.05, 0.0, 0.2],
        )
        .unwrap();
        let zero = tanh_decode(&Array1::zeros(4), &LinearBank::new(bank.normals().to_owned(), Array1::zeros(4)).unwrap(), 3, 0.2)
            .unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        let (t, sigma) = (7, 0.25);
        let mu = array![0.31, -0.12];
        let z = (bank.normals().dot(&mu) - bank.offsets()) * ((t as f64).sqrt() / sigma) * (PI / (2.0 * 3f64.sqrt()));
        let back = tanh_decode(&z, &bank, t, sigma).unwrap();
        assert!((&back - &mu).iter().all(|e| e.abs() < 1e-12));
    }
}
