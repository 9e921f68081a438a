//! Small dense linear algebra on top of `nalgebra`, exchanged as `ndarray`
//! arrays with the rest of the crate.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

pub fn to_dmatrix(a: ArrayView2<f64>) -> DMatrix<f64> {
    let (r, c) = a.dim();
    DMatrix::from_fn(r, c, |i, j| a[[i, j]])
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Singular values in descending order.
pub fn singular_values(a: ArrayView2<f64>) -> Vec<f64> {
    let svd = to_dmatrix(a).svd(false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Numerical rank and 2-norm condition number of `a`.
pub fn rank_and_condition(a: ArrayView2<f64>) -> (usize, f64) {
    let s = singular_values(a);
    let smax = s.first().copied().unwrap_or(0.0);
    let (r, c) = a.dim();
    let tol = smax * (r.max(c) as f64) * f64::EPSILON;
    let rank = s.iter().filter(|&&v| v > tol).count();
    let smin = if s.len() < c { 0.0 } else { *s.last().unwrap_or(&0.0) };
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    (rank, cond)
}

/// Cached left pseudoinverse `(A^T A)^-1 A^T` of a tall full-column-rank
/// matrix. Uses the normal equations unless `cond(A^T A)` exceeds
/// `NORMAL_EQUATIONS_MAX_COND`, in which case a Householder QR is used.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pinv: Array2<f64>,
    condition: f64,
    used_qr: bool,
}

pub const NORMAL_EQUATIONS_MAX_COND: f64 = 1e8;

impl LeastSquares {
    pub fn new(a: ArrayView2<f64>) -> Result<Self> {
        let (rows, cols) = a.dim();
        let (rank, condition) = rank_and_condition(a);
        if rows < cols || rank < cols {
            return Err(Error::RankDeficient {
                rank,
                dim: cols,
                condition,
            });
        }
        let m = to_dmatrix(a);
        let gram_cond = condition * condition;
        if gram_cond <= NORMAL_EQUATIONS_MAX_COND {
            let gram = m.transpose() * &m;
            let chol = gram.cholesky().ok_or(Error::RankDeficient {
                rank,
                dim: cols,
                condition,
            })?;
            let pinv = chol.solve(&m.transpose());
            Ok(Self {
                pinv: from_dmatrix(&pinv),
                condition,
                used_qr: false,
            })
        } else {
            let qr = m.qr();
            let r = qr.r();
            let q = qr.q();
            let r_inv = r.try_inverse().ok_or(Error::RankDeficient {
                rank,
                dim: cols,
                condition,
            })?;
            let pinv = r_inv * q.transpose();
            Ok(Self {
                pinv: from_dmatrix(&pinv),
                condition,
                used_qr: true,
            })
        }
    }

    pub fn solve(&self, rhs: &Array1<f64>) -> Array1<f64> {
        self.pinv.dot(rhs)
    }

    pub fn pinv(&self) -> &Array2<f64> {
        &self.pinv
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn used_qr(&self) -> bool {
        self.used_qr
    }
}

/// Solves the symmetric positive definite system `a x = b` (columns of `b`).
pub fn cholesky_solve(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Option<Array2<f64>> {
    let chol = to_dmatrix(a).cholesky()?;
    Some(from_dmatrix(&chol.solve(&to_dmatrix(b))))
}

/// Eigendecomposition of a symmetric matrix. Eigenvalues are returned in
/// descending order; column `k` of the second array is the matching vector.
pub fn symmetric_eigen(a: ArrayView2<f64>) -> (Vec<f64>, Array2<f64>) {
    let eig = SymmetricEigen::new(to_dmatrix(a));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let n = a.nrows();
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Array2::from_shape_fn((n, order.len()), |(r, k)| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}
