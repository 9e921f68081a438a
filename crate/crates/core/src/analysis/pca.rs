use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::symmetric_eigen;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Array1<f64>,
    /// `N x N`, column `k` is the k-th principal axis.
    pub components: Array2<f64>,
    pub variances: Vec<f64>,
    /// Variances divided by their sum; descending.
    pub fractions: Vec<f64>,
}

impl Pca {
    pub fn cumulative(&self, k: usize) -> f64 {
        self.fractions.iter().take(k).sum()
    }

    /// Coordinates of `x` (`M x N`) on the first `k` axes.
    pub fn project(&self, x: ArrayView2<f64>, k: usize) -> Array2<f64> {
        (&x - &self.mean).dot(&self.components.slice(ndarray::s![.., ..k]))
    }
}

/// Principal axes of the sample covariance of the rows of `states`.
pub fn pca(states: ArrayView2<f64>) -> Result<Pca> {
    let m = states.nrows();
    if m < 2 {
        return Err(invalid("pca needs at least two samples"));
    }
    let mean = states.mean_axis(Axis(0)).expect("nonempty");
    let centered = &states - &mean;
    let cov = centered.t().dot(&centered) / (m - 1) as f64;
    let (values, components) = symmetric_eigen(cov.view());
    let variances: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = variances.iter().sum();
    let fractions = if total > 0.0 {
        variances.iter().map(|v| v / total).collect()
    } else {
        let n = variances.len() as f64;
        vec![1.0 / n; variances.len()]
    };
    Ok(Pca {
        mean,
        components,
        variances,
        fractions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    #[test]
    fn line_has_one_component() {
        let x = Array2::from_shape_fn((50, 3), |(i, j)| i as f64 * [1.0, 2.0, -1.0][j]);
        let p = pca(x.view()).unwrap();
        assert!((p.fractions[0] - 1.0).abs() < 1e-12);
        assert!((p.fractions.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isotropic_cloud_is_flat() {
        let mut rng = seed::rng(4);
        let x = Array2::from_shape_fn((20_000, 5), |_| rng.sample::<f64, _>(StandardNormal));
        let p = pca(x.view()).unwrap();
        assert!(p.fractions.iter().all(|f| (f - 0.2).abs() < 0.01), "{:?}", p.fractions);
        let gram = p.components.t().dot(&p.components);
        assert!((&gram - &Array2::<f64>::eye(5)).iter().all(|e| e.abs() < 1e-10));
    }

    #[test]
    fn needs_two_samples() {
        assert!(pca(Array2::<f64>::zeros((1, 3)).view()).is_err());
    }
}
