use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

use super::Smoother;

/// Symmetric Gauss-Seidel in lexicographic order: one forward sweep
/// followed by one backward sweep.
#[derive(Debug, Clone)]
pub struct GaussSeidelSmoother {
    a: Arc<CsrMatrix>,
    diag: Vec<usize>,
}

impl GaussSeidelSmoother {
    pub fn new(a: Arc<CsrMatrix>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::ShapeMismatch {
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        let rp = a.row_ptr();
        let cols = a.col_idx();
        let mut diag = Vec::with_capacity(a.nrows());
        for i in 0..a.nrows() {
            let pos = (rp[i]..rp[i + 1])
                .find(|&k| cols[k] as usize == i)
                .filter(|&k| a.values()[k] != 0.0)
                .ok_or(Error::ZeroDiagonal { row: i })?;
            diag.push(pos);
        }
        Ok(Self { a, diag })
    }

    pub fn matrix(&self) -> &Arc<CsrMatrix> {
        &self.a
    }

    #[inline]
    fn relax(&self, i: usize, u: &mut [f64], rhs: &[f64]) {
        let rp = self.a.row_ptr();
        let cols = self.a.col_idx();
        let vals = self.a.values();
        let mut s = rhs[i];
        for k in rp[i]..rp[i + 1] {
            s -= vals[k] * u[cols[k] as usize];
        }
        let d = vals[self.diag[i]];
        u[i] += s / d;
    }

    pub fn forward_sweep(&self, u: &mut [f64], rhs: &[f64]) {
        for i in 0..u.len() {
            self.relax(i, u, rhs);
        }
    }

    pub fn backward_sweep(&self, u: &mut [f64], rhs: &[f64]) {
        for i in (0..u.len()).rev() {
            self.relax(i, u, rhs);
        }
    }
}

impl Smoother for GaussSeidelSmoother {
    fn smooth(&self, u: &mut [f64], rhs: &[f64]) {
        self.forward_sweep(u, rhs);
        self.backward_sweep(u, rhs);
    }
}
