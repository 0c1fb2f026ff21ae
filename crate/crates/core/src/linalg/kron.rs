//! Sums of Kronecker products applied by mode contractions.
//!
//! Vectors are tensors in row-major order: for shape `(n_1, ..., n_d)` the
//! entry `(i_1, ..., i_d)` sits at `((i_1 n_2 + i_2) n_3 + ...) + i_d`, so the
//! first factor of `A_1 ⊗ ... ⊗ A_d` acts on the slowest index.

use std::sync::Arc;

use crate::error::{Error, Result};

use super::{CsrMatrix, LinearOperator};

/// One term `weight * (A_1 ⊗ ... ⊗ A_d)`.
#[derive(Debug, Clone)]
pub struct KronTerm {
    pub weight: f64,
    pub factors: Vec<Arc<CsrMatrix>>,
}

/// `Σ_t w_t (A_t1 ⊗ ... ⊗ A_td)` with conformable (possibly rectangular) factors.
#[derive(Debug, Clone)]
pub struct KroneckerSum {
    terms: Vec<KronTerm>,
    shape_in: Vec<usize>,
    shape_out: Vec<usize>,
}

impl KroneckerSum {
    pub fn new(terms: Vec<KronTerm>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("Kronecker sum needs at least one term".into()))?;
        if first.factors.is_empty() {
            return Err(Error::InvalidArgument("Kronecker term without factors".into()));
        }
        let shape_in: Vec<usize> = first.factors.iter().map(|f| f.ncols()).collect();
        let shape_out: Vec<usize> = first.factors.iter().map(|f| f.nrows()).collect();
        for t in &terms {
            let si: Vec<usize> = t.factors.iter().map(|f| f.ncols()).collect();
            let so: Vec<usize> = t.factors.iter().map(|f| f.nrows()).collect();
            if si != shape_in || so != shape_out {
                return Err(Error::InvalidArgument(format!(
                    "non-conformable Kronecker terms: {shape_out:?}x{shape_in:?} vs {so:?}x{si:?}"
                )));
            }
        }
        Ok(Self {
            terms,
            shape_in,
            shape_out,
        })
    }

    pub fn single(weight: f64, factors: Vec<Arc<CsrMatrix>>) -> Result<Self> {
        Self::new(vec![KronTerm { weight, factors }])
    }

    pub fn terms(&self) -> &[KronTerm] {
        &self.terms
    }

    pub fn shape_in(&self) -> &[usize] {
        &self.shape_in
    }

    pub fn shape_out(&self) -> &[usize] {
        &self.shape_out
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols() {
            return Err(Error::ShapeMismatch {
                expected: self.ncols(),
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.nrows()];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    /// Explicit expansion; meant for coarse levels and tests.
    pub fn to_csr(&self) -> Result<CsrMatrix> {
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for t in &self.terms {
            let mut entries = vec![(0usize, 0usize, t.weight)];
            for f in &t.factors {
                let mut next = Vec::with_capacity(entries.len() * 3);
                for &(r, c, v) in &entries {
                    for i in 0..f.nrows() {
                        for (j, a) in f.row(i) {
                            next.push((r * f.nrows() + i, c * f.ncols() + j, v * a));
                        }
                    }
                }
                entries = next;
            }
            triplets.extend(entries);
        }
        CsrMatrix::from_triplets(self.nrows(), self.ncols(), triplets)
    }
}

impl LinearOperator for KroneckerSum {
    fn nrows(&self) -> usize {
        self.shape_out.iter().product()
    }

    fn ncols(&self) -> usize {
        self.shape_in.iter().product()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols());
        assert_eq!(y.len(), self.nrows());
        y.fill(0.0);
        let mut a = Vec::new();
        let mut b = Vec::new();
        for t in &self.terms {
            let mut shape = self.shape_in.clone();
            a.clear();
            a.extend_from_slice(x);
            for (mode, f) in t.factors.iter().enumerate() {
                mode_apply(&a, &shape, mode, f, &mut b);
                shape[mode] = f.nrows();
                std::mem::swap(&mut a, &mut b);
            }
            for (yi, ai) in y.iter_mut().zip(&a) {
                *yi += t.weight * ai;
            }
        }
    }
}

/// Contracts `x` (row-major tensor of `shape`) with `a` along `mode`; `out`
/// gets the tensor whose `mode` extent is `a.nrows()`.
pub fn mode_apply(x: &[f64], shape: &[usize], mode: usize, a: &CsrMatrix, out: &mut Vec<f64>) {
    let pre: usize = shape[..mode].iter().product();
    let n = shape[mode];
    let post: usize = shape[mode + 1..].iter().product();
    assert_eq!(a.ncols(), n);
    assert_eq!(x.len(), pre * n * post);
    let r = a.nrows();
    out.clear();
    out.resize(pre * r * post, 0.0);
    if post == 1 {
        for p in 0..pre {
            let xb = &x[p * n..(p + 1) * n];
            for i in 0..r {
                out[p * r + i] = a.row(i).map(|(c, v)| v * xb[c]).sum();
            }
        }
        return;
    }
    for p in 0..pre {
        for i in 0..r {
            let o = &mut out[(p * r + i) * post..(p * r + i + 1) * post];
            for (c, v) in a.row(i) {
                let xs = &x[(p * n + c) * post..(p * n + c + 1) * post];
                for (oi, xi) in o.iter_mut().zip(xs) {
                    *oi += v * xi;
                }
            }
        }
    }
}

/// Applies `A_1 ⊗ ... ⊗ A_d` (single term, unit weight) to `x`.
pub fn kron_apply_factors(factors: &[&CsrMatrix], x: &[f64]) -> Vec<f64> {
    let mut shape: Vec<usize> = factors.iter().map(|f| f.ncols()).collect();
    let mut a = x.to_vec();
    let mut b = Vec::new();
    for (mode, f) in factors.iter().enumerate() {
        mode_apply(&a, &shape, mode, f, &mut b);
        shape[mode] = f.nrows();
        std::mem::swap(&mut a, &mut b);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};

    fn random_csr(rng: &mut impl Rng, r: usize, c: usize) -> CsrMatrix {
        let rows: Vec<Vec<f64>> = (0..r)
            .map(|_| (0..c).map(|_| if rng.gen_bool(0.8) { rng.gen_range(-1.0..1.0) } else { 0.0 }).collect())
            .collect();
        CsrMatrix::from_dense(&rows).unwrap()
    }

    #[test]
    fn identity_factors_leave_vector_unchanged() {
        let k = KroneckerSum::single(1.0, vec![Arc::new(CsrMatrix::identity(3)), Arc::new(CsrMatrix::identity(4))])
            .unwrap();
        let x: Vec<f64> = (0..12).map(|i| i as f64 * 0.5 - 2.0).collect();
        assert_eq!(k.apply(&x).unwrap(), x);
    }

    #[test]
    fn matches_explicit_expansion_2d() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let a = random_csr(&mut rng, 2, 2);
        let b = random_csr(&mut rng, 2, 2);
        let k = KroneckerSum::single(1.0, vec![Arc::new(a.clone()), Arc::new(b.clone())]).unwrap();
        let explicit = a.to_dmatrix().kronecker(&b.to_dmatrix());
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = k.apply(&x).unwrap();
        let z = &explicit * nalgebra::DVector::from_vec(x);
        for i in 0..4 {
            assert!((y[i] - z[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let k = KroneckerSum::single(1.0, vec![Arc::new(CsrMatrix::identity(2)), Arc::new(CsrMatrix::identity(2))])
            .unwrap();
        assert!(matches!(k.apply(&[1.0; 3]), Err(Error::ShapeMismatch { .. })));
        let bad = KroneckerSum::new(vec![
            KronTerm {
                weight: 1.0,
                factors: vec![Arc::new(CsrMatrix::identity(2))],
            },
            KronTerm {
                weight: 1.0,
                factors: vec![Arc::new(CsrMatrix::identity(3))],
            },
        ]);
        assert!(bad.is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::{prop_assert, proptest};

        proptest! {
            #[test]
            fn kron_sum_equals_expansion(d in 1usize..=3, nterms in 1usize..=3, seed in 0u64..1000) {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let rows: Vec<usize> = (0..d).map(|_| rng.gen_range(1..=4)).collect();
                let cols: Vec<usize> = (0..d).map(|_| rng.gen_range(1..=4)).collect();
                let mut terms = Vec::new();
                let mut dense = DMatrix::zeros(rows.iter().product(), cols.iter().product());
                for _ in 0..nterms {
                    let w = rng.gen_range(-2.0..2.0);
                    let factors: Vec<CsrMatrix> = (0..d).map(|k| random_csr(&mut rng, rows[k], cols[k])).collect();
                    let mut e = DMatrix::from_element(1, 1, w);
                    for f in &factors {
                        e = e.kronecker(&f.to_dmatrix());
                    }
                    dense += e;
                    terms.push(KronTerm { weight: w, factors: factors.into_iter().map(Arc::new).collect() });
                }
                let k = KroneckerSum::new(terms).unwrap();
                let x: Vec<f64> = (0..k.ncols()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let y = k.apply(&x).unwrap();
                let z = &dense * nalgebra::DVector::from_vec(x);
                for i in 0..y.len() {
                    prop_assert!((y[i] - z[i]).abs() < 1e-12);
                }
                let csr = k.to_csr().unwrap().to_dmatrix();
                prop_assert!((csr - dense).abs().max() < 1e-12);
            }
        }
    }
}
