//! Small dense kernels: Cholesky with pivot reporting, symmetric eigenvalues.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    l: DMatrix<f64>,
}

impl DenseCholesky {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                found: a.ncols(),
            });
        }
        let mut l = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotSpd { pivot: j, value: d });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn order(&self) -> usize {
        self.l.nrows()
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.order();
        assert_eq!(x.len(), n);
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.l[(i, k)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Ascending eigenvalues of the symmetric-definite pencil `A x = λ B x`.
pub fn generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    let chol = DenseCholesky::new(b)?;
    let l = &chol.l;
    // C = L^{-1} A L^{-T}
    let mut y = a.clone();
    for c in 0..n {
        let mut col: DVector<f64> = y.column(c).into_owned();
        forward(l, col.as_mut_slice());
        y.set_column(c, &col);
    }
    let mut c = y.transpose();
    for col_idx in 0..n {
        let mut col: DVector<f64> = c.column(col_idx).into_owned();
        forward(l, col.as_mut_slice());
        c.set_column(col_idx, &col);
    }
    let c = (&c + c.transpose()) * 0.5;
    Ok(symmetric_eigenvalues(&c))
}

fn forward(l: &DMatrix<f64>, x: &mut [f64]) {
    for i in 0..x.len() {
        let mut s = x[i];
        for k in 0..i {
            s -= l[(i, k)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
}

/// Kronecker product of dense matrices, first factor slowest.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}
