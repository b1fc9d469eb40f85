//! Cholesky factorization for symmetric positive definite systems.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Lower-triangular factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Matrix,
}

impl Cholesky {
    /// Factors a symmetric positive definite matrix. Only the lower triangle
    /// of `a` is read.
    ///
    /// A pivot that is non-positive, or negligible relative to the largest
    /// diagonal entry, is reported as [`Error::Singular`].
    pub fn factor(a: &Matrix) -> Result<Self> {
        let n = a.rows();
        a.ensure_shape("cholesky", n, n)?;
        let max_diag = (0..n).map(|i| libm::fabs(a.get(i, i))).fold(0.0, f64::max);
        let tol = f64::EPSILON * (n as f64) * max_diag;

        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut diag = a.get(j, j);
            for k in 0..j {
                let v = l.get(j, k);
                diag -= v * v;
            }
            if !(diag > tol) {
                return Err(Error::Singular { pivot: j });
            }
            let ljj = libm::sqrt(diag);
            l.set(j, j, ljj);
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                let (ri, rj) = (l.row(i), l.row(j));
                for k in 0..j {
                    s -= ri[k] * rj[k];
                }
                l.set(i, j, s / ljj);
            }
        }
        Ok(Cholesky { lower: l })
    }

    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    /// Solves `A X = B` for every column of `B`.
    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        let n = self.dim();
        if b.rows() != n {
            return Err(Error::DimensionMismatch {
                op: "cholesky_solve",
                expected: (n, b.cols()),
                found: b.shape(),
            });
        }
        let m = b.cols();
        let l = &self.lower;
        let mut x = b.clone();
        // forward substitution: L Z = B
        for i in 0..n {
            for k in 0..i {
                let lik = l.get(i, k);
                if lik == 0.0 {
                    continue;
                }
                for j in 0..m {
                    let v = x.get(i, j) - lik * x.get(k, j);
                    x.set(i, j, v);
                }
            }
            let lii = l.get(i, i);
            x.row_mut(i).iter_mut().for_each(|v| *v /= lii);
        }
        // back substitution: Lᵀ X = Z
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let lki = l.get(k, i);
                if lki == 0.0 {
                    continue;
                }
                for j in 0..m {
                    let v = x.get(i, j) - lki * x.get(k, j);
                    x.set(i, j, v);
                }
            }
            let lii = l.get(i, i);
            x.row_mut(i).iter_mut().for_each(|v| *v /= lii);
        }
        Ok(x)
    }
}
