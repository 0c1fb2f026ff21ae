//! Subspace-corrected mass smoother.
//!
//! With the univariate splitting `V = V_0 ⊕ V_1` in every direction the
//! tensor space splits into `2^d` subspaces `V_α`. On `V_α` the reduced form
//! is replaced by
//!
//! `L_α = Σ_{j: α_j = 1} (⊗_k [B₁ if k = j else M_{α_k}]) + (d - |α|) σ ⊗_k M_{α_k}`
//!
//! which factors as `(⊗_{α_k = 0} M₀) ⊗ K_α` up to a permutation of modes,
//! with a small dense `K_α` acting on the `α_k = 1` directions.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::assembly::{assemble_univariate, ConstrainedSpace};
use crate::error::{Error, Result};
use crate::linalg::{dense::kron, kron_apply_factors, BandedCholesky, CsrMatrix, DenseCholesky, LinearOperator};

use super::splitting::{build_splitting, UnivariateSplitting};
use super::Smoother;

#[derive(Debug, Clone)]
struct LocalBlock {
    alpha: Vec<bool>,
    restrict: Vec<Arc<CsrMatrix>>,
    extend: Vec<Arc<CsrMatrix>>,
    shape: Vec<usize>,
    /// Scalar for `α = 0`: `L = dσ ⊗ M₀`.
    scalar: f64,
    /// Dense factor of `K_α` and the permutation that makes its modes trailing.
    dense: Option<(DenseCholesky, Vec<usize>)>,
}

/// Additive subspace correction `τ Σ_α E_α L_α⁻¹ E_αᵀ`.
#[derive(Clone)]
pub struct SubspaceMassSmoother {
    splittings: Vec<Arc<UnivariateSplitting>>,
    m0_chol: Vec<BandedCholesky>,
    sigma: f64,
    tau: f64,
    blocks: Vec<LocalBlock>,
    operator: Option<Arc<dyn LinearOperator + Send + Sync>>,
}

impl std::fmt::Debug for SubspaceMassSmoother {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SubspaceMassSmoother")
            .field("dim", &self.splittings.len())
            .field("sigma", &self.sigma)
            .field("tau", &self.tau)
            .field("blocks", &self.blocks.len())
            .finish()
    }
}

/// Index map `perm[new] = old` moving the modes flagged in `trailing` behind
/// the others, both groups keeping their order.
fn trailing_permutation(shape: &[usize], trailing: &[bool]) -> Vec<usize> {
    let d = shape.len();
    let order: Vec<usize> = (0..d).filter(|&k| !trailing[k]).chain((0..d).filter(|&k| trailing[k])).collect();
    let new_shape: Vec<usize> = order.iter().map(|&k| shape[k]).collect();
    let n: usize = shape.iter().product();
    let mut old_strides = vec![1usize; d];
    for k in (0..d.saturating_sub(1)).rev() {
        old_strides[k] = old_strides[k + 1] * shape[k + 1];
    }
    let mut perm = Vec::with_capacity(n);
    let mut idx = vec![0usize; d];
    for flat in 0..n {
        crate::assembly::unflatten(flat, &new_shape, &mut idx);
        perm.push(order.iter().zip(&idx).map(|(&k, &i)| i * old_strides[k]).sum());
    }
    perm
}

impl SubspaceMassSmoother {
    /// `sigma` is the scaled inverse-inequality parameter (units `h⁻⁴`).
    pub fn new(splittings: Vec<Arc<UnivariateSplitting>>, sigma: f64, tau: f64) -> Result<Self> {
        if !(sigma > 0.0) || !(tau > 0.0) {
            return Err(Error::InvalidArgument(format!("sigma and tau must be positive, got {sigma}, {tau}")));
        }
        let d = splittings.len();
        let m0_chol = splittings.iter().map(|s| s.m0.cholesky()).collect::<Result<Vec<_>>>()?;
        let mut blocks = Vec::new();
        for mask in 0..(1usize << d) {
            let alpha: Vec<bool> = (0..d).map(|k| mask >> (d - 1 - k) & 1 == 1).collect();
            let shape: Vec<usize> = (0..d)
                .map(|k| if alpha[k] { splittings[k].n1() } else { splittings[k].n0() })
                .collect();
            if shape.contains(&0) {
                continue;
            }
            let extend: Vec<Arc<CsrMatrix>> = (0..d)
                .map(|k| Arc::new(if alpha[k] { splittings[k].e1.clone() } else { splittings[k].e0.clone() }))
                .collect();
            let restrict = extend.iter().map(|e| Arc::new(e.transpose())).collect();
            let ones: Vec<usize> = (0..d).filter(|&k| alpha[k]).collect();
            let zeros = d - ones.len();
            let (scalar, dense) = if ones.is_empty() {
                (d as f64 * sigma, None)
            } else {
                let kron_all = |pick: &dyn Fn(usize) -> DMatrix<f64>| {
                    ones.iter().fold(DMatrix::from_element(1, 1, 1.0), |acc, &k| kron(&acc, &pick(k)))
                };
                let mut kmat = kron_all(&|k| splittings[k].m1.clone()) * (zeros as f64 * sigma);
                for &j in &ones {
                    kmat += kron_all(&|k| if k == j { splittings[k].b1.clone() } else { splittings[k].m1.clone() });
                }
                let perm = trailing_permutation(&shape, &alpha);
                (1.0, Some((DenseCholesky::new(&kmat)?, perm)))
            };
            blocks.push(LocalBlock {
                alpha,
                restrict,
                extend,
                shape,
                scalar,
                dense,
            });
        }
        Ok(Self {
            splittings,
            m0_chol,
            sigma,
            tau,
            blocks,
            operator: None,
        })
    }

    /// Builds the splittings of `space` (parameter-domain factors).
    pub fn for_space(space: &ConstrainedSpace, sigma: f64, tau: f64) -> Result<Self> {
        let splittings = space
            .spaces()
            .iter()
            .zip(space.free_ranges())
            .map(|(s, r)| Ok(Arc::new(build_splitting(&assemble_univariate(s), r.clone())?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(splittings, sigma, tau)
    }

    /// Attaches the operator whose residual drives [`Smoother::smooth`].
    pub fn with_operator(mut self, op: Arc<dyn LinearOperator + Send + Sync>) -> Self {
        self.operator = Some(op);
        self
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn splittings(&self) -> &[Arc<UnivariateSplitting>] {
        &self.splittings
    }

    pub fn ndofs(&self) -> usize {
        self.splittings.iter().map(|s| s.n_free()).product()
    }

    /// The multi-indices with nonempty subspaces, in application order.
    pub fn subspaces(&self) -> Vec<Vec<bool>> {
        self.blocks.iter().map(|b| b.alpha.clone()).collect()
    }

    /// `L_α⁻¹ y` for the block with multi-index `alpha`, in place.
    fn local_solve(&self, block: &LocalBlock, y: &mut [f64]) {
        let d = block.shape.len();
        for k in 0..d {
            if block.alpha[k] {
                continue;
            }
            let n = block.shape[k];
            let post: usize = block.shape[k + 1..].iter().product();
            for chunk in y.chunks_mut(n * post) {
                self.m0_chol[k].solve_fibers(chunk, post);
            }
        }
        match &block.dense {
            None => {
                for v in y.iter_mut() {
                    *v /= block.scalar;
                }
            }
            Some((chol, perm)) => {
                let m = chol.order();
                let mut buf: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
                for chunk in buf.chunks_mut(m) {
                    chol.solve_in_place(chunk);
                }
                for (&i, v) in perm.iter().zip(&buf) {
                    y[i] = *v;
                }
            }
        }
    }

    /// `z = τ Σ_α E_α L_α⁻¹ E_αᵀ r`.
    pub fn apply_inverse(&self, r: &[f64]) -> Vec<f64> {
        assert_eq!(r.len(), self.ndofs());
        let mut z = vec![0.0; r.len()];
        for block in &self.blocks {
            let restrict: Vec<&CsrMatrix> = block.restrict.iter().map(|a| a.as_ref()).collect();
            let mut y = kron_apply_factors(&restrict, r);
            self.local_solve(block, &mut y);
            let extend: Vec<&CsrMatrix> = block.extend.iter().map(|a| a.as_ref()).collect();
            let c = kron_apply_factors(&extend, &y);
            for (zi, ci) in z.iter_mut().zip(&c) {
                *zi += ci;
            }
        }
        for v in z.iter_mut() {
            *v *= self.tau;
        }
        z
    }

    /// Dense `L_α` for the given multi-index (tests and verification).
    pub fn local_operator_dense(&self, alpha: &[bool]) -> Option<DMatrix<f64>> {
        let block = self.blocks.iter().find(|b| b.alpha == alpha)?;
        let d = alpha.len();
        let ones = alpha.iter().filter(|a| **a).count();
        let factor = |k: usize, stiff: bool| -> DMatrix<f64> {
            let s = &self.splittings[k];
            match (alpha[k], stiff) {
                (true, true) => s.b1.clone(),
                (true, false) => s.m1.clone(),
                (false, _) => s.m0.to_dmatrix(),
            }
        };
        let n: usize = block.shape.iter().product();
        let mut l = DMatrix::zeros(n, n);
        for j in (0..d).filter(|&j| alpha[j]) {
            l += (0..d).fold(DMatrix::from_element(1, 1, 1.0), |acc, k| kron(&acc, &factor(k, k == j)));
        }
        l += (0..d).fold(DMatrix::from_element(1, 1, 1.0), |acc, k| kron(&acc, &factor(k, false)))
            * ((d - ones) as f64 * self.sigma);
        Some(l)
    }

    /// Dense `E_α` (tests and verification).
    pub fn embedding_dense(&self, alpha: &[bool]) -> Option<DMatrix<f64>> {
        let block = self.blocks.iter().find(|b| b.alpha == alpha)?;
        Some(
            block
                .extend
                .iter()
                .fold(DMatrix::from_element(1, 1, 1.0), |acc, e| kron(&acc, &e.to_dmatrix())),
        )
    }
}

impl Smoother for SubspaceMassSmoother {
    fn smooth(&self, u: &mut [f64], rhs: &[f64]) {
        let op = self.operator.as_ref().expect("mass smoother used without an operator");
        let mut r = vec![0.0; rhs.len()];
        op.residual_into(u, rhs, &mut r);
        let c = self.apply_inverse(&r);
        for (ui, ci) in u.iter_mut().zip(&c) {
            *ui += ci;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{parameter_operators, BoundaryCondition};
    use crate::linalg::dense::{generalized_eigenvalues, symmetric_eigenvalues};
    use rand::{Rng, SeedableRng};

    fn smoother(d: usize, p: usize, level: u32, sigma_scale: f64) -> (SubspaceMassSmoother, ConstrainedSpace) {
        let cs = ConstrainedSpace::uniform(d, p, level, BoundaryCondition::FirstBiharmonic).unwrap();
        let h = cs.spaces()[0].h();
        let s = SubspaceMassSmoother::for_space(&cs, sigma_scale * h.powi(-4), 1.0).unwrap();
        (s, cs)
    }

    fn dense_inverse(s: &SubspaceMassSmoother) -> DMatrix<f64> {
        let n = s.ndofs();
        let mut total = DMatrix::zeros(n, n);
        for alpha in s.subspaces() {
            let e = s.embedding_dense(&alpha).unwrap();
            let l = s.local_operator_dense(&alpha).unwrap();
            let linv = l.try_inverse().unwrap();
            total += &e * linv * e.transpose();
        }
        total
    }

    #[test]
    fn zero_residual_gives_zero_correction() {
        let (s, cs) = smoother(2, 3, 3, 1.0 / 0.015);
        assert!(s.apply_inverse(&vec![0.0; cs.ndofs()]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_dimensional_application_matches_dense_sum() {
        let (s, cs) = smoother(1, 4, 3, 144.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let r: Vec<f64> = (0..cs.ndofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z = s.apply_inverse(&r);
        let dz = dense_inverse(&s) * nalgebra::DVector::from_vec(r);
        let scale = dz.amax();
        for i in 0..z.len() {
            assert!((z[i] - dz[i]).abs() < 1e-11 * scale.max(1.0));
        }
    }

    #[test]
    fn tensor_application_matches_dense_sum() {
        for (d, p, l) in [(2, 3, 2), (2, 5, 2), (3, 3, 2)] {
            let (s, cs) = smoother(d, p, l, 1.0 / 0.015);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
            let r: Vec<f64> = (0..cs.ndofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let z = s.apply_inverse(&r);
            let dz = dense_inverse(&s) * nalgebra::DVector::from_vec(r);
            let err = (nalgebra::DVector::from_vec(z) - &dz).amax();
            assert!(err < 1e-10 * dz.amax(), "d={d} p={p}: {err}");
        }
    }

    #[test]
    fn two_dimensional_blocks_have_the_expected_form() {
        let (s, _) = smoother(2, 4, 3, 144.0);
        let sp = &s.splittings()[0];
        let m0 = sp.m0.to_dmatrix();
        let l00 = s.local_operator_dense(&[false, false]).unwrap();
        assert!((l00 - kron(&m0, &m0) * (2.0 * s.sigma())).abs().max() < 1e-9);
        let l01 = s.local_operator_dense(&[false, true]).unwrap();
        let want = kron(&m0, &(&sp.m1 * s.sigma() + &sp.b1));
        assert!((l01 - &want).abs().max() < 1e-9 * want.abs().max());
        let l11 = s.local_operator_dense(&[true, true]).unwrap();
        let want = kron(&sp.b1, &sp.m1) + kron(&sp.m1, &sp.b1);
        assert!((l11 - &want).abs().max() < 1e-9 * want.abs().max());
    }

    #[test]
    fn three_dimensional_interior_block_is_scaled_mass() {
        let (s, _) = smoother(3, 3, 2, 144.0);
        let m0 = s.splittings()[0].m0.to_dmatrix();
        let l = s.local_operator_dense(&[false, false, false]).unwrap();
        let want = kron(&kron(&m0, &m0), &m0) * (3.0 * s.sigma());
        assert!((l - &want).abs().max() < 1e-9 * want.abs().max());
    }

    #[test]
    fn smoother_is_symmetric_and_positive() {
        let (s, cs) = smoother(2, 3, 3, 1.0 / 0.015);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..cs.ndofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..cs.ndofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = crate::linalg::dot(&s.apply_inverse(&x), &y);
        let b = crate::linalg::dot(&x, &s.apply_inverse(&y));
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        assert!(crate::linalg::dot(&s.apply_inverse(&x), &x) > 0.0);
    }

    #[test]
    fn local_blocks_dominate_reduced_form() {
        // L ≥ B̄ on each subspace and the pinch bound holds with a moderate constant
        let (s, cs) = smoother(2, 4, 2, 144.0);
        let (bbar, mbar) = parameter_operators(&cs).unwrap();
        let b = bbar.to_csr().unwrap().to_dmatrix();
        for alpha in s.subspaces() {
            let e = s.embedding_dense(&alpha).unwrap();
            let ba = e.transpose() * &b * &e;
            let l = s.local_operator_dense(&alpha).unwrap();
            let scale = l.abs().max();
            let ev = symmetric_eigenvalues(&(l - ba));
            assert!(ev[0] > -1e-10 * scale, "{alpha:?}: {}", ev[0]);
        }
        let linv = dense_inverse(&s);
        let l = linv.try_inverse().unwrap();
        let h4 = cs.spaces()[0].h().powi(-4);
        let upper = b.clone() + mbar.to_csr().unwrap().to_dmatrix() * h4;
        let lo = generalized_eigenvalues(&l, &b).unwrap();
        let hi = generalized_eigenvalues(&l, &upper).unwrap();
        assert!(lo[0] > 0.2, "{}", lo[0]);
        assert!(*hi.last().unwrap() < 1e3);
    }
}
