//! Matrix containers and kernels.

mod banded;
pub mod dense;
mod kron;
mod pcg;
mod sparse;

pub use banded::{BandedCholesky, BandedMatrix};
pub use dense::DenseCholesky;
pub use kron::{kron_apply_factors, mode_apply, KronTerm, KroneckerSum};
pub use pcg::{pcg, PcgOutcome};
pub use sparse::CsrMatrix;

#[cfg(test)]
pub(crate) use pcg::dot;

/// A linear map `y = A x` on flat vectors.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        self.apply_into(x, &mut y);
        y
    }

    /// `r = b - A x`.
    fn residual_into(&self, x: &[f64], b: &[f64], r: &mut [f64]) {
        self.apply_into(x, r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for std::sync::Arc<T> {
    fn nrows(&self) -> usize {
        (**self).nrows()
    }

    fn ncols(&self) -> usize {
        (**self).ncols()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply_into(x, y)
    }
}
