//! Univariate splitting of the clamped spline space into an interior part
//! (even derivatives of order `2 <= 2l < p` vanish at both ends) and its
//! L²-orthogonal complement.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::assembly::{restrict_banded, UnivariateSystem};
use crate::error::{Error, Result};
use crate::linalg::{BandedCholesky, BandedMatrix, CsrMatrix};

/// Embeddings and restricted matrices of `V_0 ⊕ V_1` inside the free space.
#[derive(Debug, Clone)]
pub struct UnivariateSplitting {
    /// `n_free x n0`, identity away from the ends.
    pub e0: CsrMatrix,
    /// `n_free x n1`, dense, M-orthonormal columns.
    pub e1: CsrMatrix,
    pub m0: BandedMatrix,
    pub b0: CsrMatrix,
    pub m1: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    /// Free-space mass and stiffness the restrictions were taken from.
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
    pub h: f64,
}

/// Boundary functionals `u^{(2l)}(0)` and `u^{(2l)}(1)`, `2 <= 2l < p`, on
/// the free basis; rows are scaled to unit Euclidean norm.
pub fn boundary_constraints(system: &UnivariateSystem, free: Range<usize>) -> Result<DMatrix<f64>> {
    let s = &system.space;
    let p = s.degree();
    let orders: Vec<usize> = (1..).map(|l| 2 * l).take_while(|&k| k < p).collect();
    let nf = free.len();
    let mut c = DMatrix::zeros(2 * orders.len(), nf);
    for (end, x) in [0.0, 1.0].into_iter().enumerate() {
        let ev = s.eval_basis(x, p)?;
        for (r, &k) in orders.iter().enumerate() {
            let row = end * orders.len() + r;
            for (a, v) in ev.values[k].iter().enumerate() {
                let g = ev.first + a;
                if free.contains(&g) {
                    c[(row, g - free.start)] = *v;
                }
            }
            let norm = c.row(row).norm();
            if norm > 0.0 {
                c.row_mut(row).scale_mut(1.0 / norm);
            }
        }
    }
    Ok(c)
}

/// Orthonormal basis of the kernel of `c` (columns); errors if `c` does not
/// have full row rank.
fn nullspace(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = c.ncols();
    if c.nrows() == 0 {
        return Ok(DMatrix::identity(k, k));
    }
    let eig = (c.transpose() * c).symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let null: Vec<usize> = (0..k).filter(|&i| eig.eigenvalues[i] <= 1e-10 * scale).collect();
    let rank = k - null.len();
    if rank < c.nrows() {
        return Err(Error::RankDeficient { rank, rows: c.nrows() });
    }
    let mut order = null;
    // deterministic column order independent of the eigensolver's
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    Ok(DMatrix::from_fn(k, order.len(), |i, j| eig.eigenvectors[(i, order[j])]))
}

fn to_banded(a: &CsrMatrix) -> BandedMatrix {
    let mut bw = 0;
    for i in 0..a.nrows() {
        for (j, _) in a.row(i) {
            bw = bw.max(i.abs_diff(j));
        }
    }
    let mut m = BandedMatrix::zeros(a.nrows(), bw);
    for i in 0..a.nrows() {
        for (j, v) in a.row(i) {
            if j <= i {
                m.set(i, j, v);
            }
        }
    }
    m
}

fn dense_to_csr(a: &DMatrix<f64>) -> CsrMatrix {
    let rows: Vec<Vec<f64>> = (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect();
    if rows.is_empty() {
        return CsrMatrix::from_triplets(0, a.ncols(), Vec::new()).expect("empty");
    }
    CsrMatrix::from_dense(&rows).expect("rectangular by construction")
}

/// Quadratic form `Eᵀ A E` for sparse `A`, `E`.
fn congruence(e: &CsrMatrix, a: &CsrMatrix) -> Result<CsrMatrix> {
    e.transpose().matmul(&a.matmul(e)?)
}

pub fn build_splitting(system: &UnivariateSystem, free: Range<usize>) -> Result<UnivariateSplitting> {
    let s = &system.space;
    let p = s.degree();
    if p < 3 {
        return Err(Error::InvalidArgument(format!("the splitting needs degree >= 3, got {p}")));
    }
    let nf = free.len();
    let n = s.dim();
    let c = boundary_constraints(system, free.clone())?;
    let nc = c.nrows();

    // columns touched by the left and right functionals
    let k_left = (p + 1).saturating_sub(free.start).min(nf);
    let right_start = free.start.max(n - 1 - p) - free.start;
    let k_right = nf - right_start.min(nf);

    let mut triplets = Vec::new();
    let n0;
    if k_left + k_right <= nf && nc > 0 {
        let half = nc / 2;
        let left = nullspace(&c.view((0, 0), (half, k_left)).into_owned())?;
        let right = nullspace(&c.view((half, right_start), (half, k_right)).into_owned())?;
        let mut col = 0;
        for j in 0..left.ncols() {
            for i in 0..k_left {
                triplets.push((i, col, left[(i, j)]));
            }
            col += 1;
        }
        for i in k_left..right_start {
            triplets.push((i, col, 1.0));
            col += 1;
        }
        for j in 0..right.ncols() {
            for i in 0..k_right {
                triplets.push((right_start + i, col, right[(i, j)]));
            }
            col += 1;
        }
        n0 = col;
    } else {
        let z = nullspace(&c)?;
        for j in 0..z.ncols() {
            for i in 0..nf {
                triplets.push((i, j, z[(i, j)]));
            }
        }
        n0 = z.ncols();
    }
    let e0 = CsrMatrix::from_triplets(nf, n0, triplets)?;

    let mass = restrict_banded(&system.mass, free.clone());
    let stiffness = restrict_banded(&system.stiffness, free);
    let mass_chol: BandedCholesky = to_banded(&mass).cholesky()?;

    // E1 = M⁻¹ Cᵀ, then M-orthonormalized via the eigen-decomposition of its Gram matrix
    let mut raw = DMatrix::zeros(nf, nc);
    for r in 0..nc {
        let col: Vec<f64> = c.row(r).iter().copied().collect();
        raw.set_column(r, &nalgebra::DVector::from_vec(mass_chol.solve(&col)));
    }
    let mut e1 = raw;
    if nc > 0 {
        let mass_d = mass.to_dmatrix();
        // a second pass removes what the first loses to the Gram matrix's conditioning
        for _ in 0..2 {
            let gram = e1.transpose() * &mass_d * &e1;
            let gram = (&gram + gram.transpose()) * 0.5;
            let eig = gram.symmetric_eigen();
            let mut t = eig.eigenvectors.clone();
            for j in 0..nc {
                let lam = eig.eigenvalues[j];
                if !(lam > 0.0) {
                    return Err(Error::RankDeficient { rank: j, rows: nc });
                }
                t.column_mut(j).scale_mut(1.0 / lam.sqrt());
            }
            e1 *= t;
        }
    }
    let e1 = dense_to_csr(&e1);

    let m0 = to_banded(&congruence(&e0, &mass)?);
    let b0 = congruence(&e0, &stiffness)?;
    let m1 = congruence(&e1, &mass)?.to_dmatrix();
    let b1 = congruence(&e1, &stiffness)?.to_dmatrix();
    Ok(UnivariateSplitting {
        e0,
        e1,
        m0,
        b0,
        m1: (&m1 + m1.transpose()) * 0.5,
        b1: (&b1 + b1.transpose()) * 0.5,
        mass,
        stiffness,
        h: s.h(),
    })
}

impl UnivariateSplitting {
    pub fn n_free(&self) -> usize {
        self.e0.nrows()
    }

    pub fn n0(&self) -> usize {
        self.e0.ncols()
    }

    pub fn n1(&self) -> usize {
        self.e1.ncols()
    }

    /// Largest eigenvalue of `M₀⁻¹ B₀`.
    pub fn inverse_inequality_constant(&self) -> Result<f64> {
        if self.n0() == 0 {
            return Ok(0.0);
        }
        let ev = crate::linalg::dense::generalized_eigenvalues(&self.b0.to_dmatrix(), &self.m0.to_dmatrix())?;
        Ok(ev.last().copied().unwrap_or(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_univariate, clamp_constraints, BoundaryCondition};
    use crate::spline::SplineSpace;

    fn split(p: usize, level: u32) -> (UnivariateSplitting, UnivariateSystem) {
        let s = SplineSpace::new(p, level).unwrap();
        let u = assemble_univariate(&s);
        let free = clamp_constraints(&s, BoundaryCondition::FirstBiharmonic).unwrap();
        (build_splitting(&u, free).unwrap(), u)
    }

    #[test]
    fn cubic_splitting_has_two_boundary_functions() {
        let (sp, _) = split(3, 4);
        assert_eq!(sp.n1(), 2);
        assert_eq!(sp.n0() + sp.n1(), sp.n_free());
    }

    #[test]
    fn dimensions_add_up() {
        for p in 3..=10 {
            for level in 2..=5 {
                let (sp, _) = split(p, level);
                assert_eq!(sp.n0() + sp.n1(), sp.n_free(), "p={p} l={level}");
                assert_eq!(sp.n1(), 2 * ((p + 1) / 2 - 1));
            }
        }
    }

    #[test]
    fn parts_are_l2_orthogonal() {
        for (p, level) in [(5, 5), (3, 2), (8, 3), (10, 2)] {
            let (sp, _) = split(p, level);
            let cross = congruence_rect(&sp.e0, &sp.mass, &sp.e1);
            assert!(cross.abs().max() < 1e-10, "p={p}: {}", cross.abs().max());
            let id = DMatrix::<f64>::identity(sp.n1(), sp.n1());
            assert!((&sp.m1 - id).abs().max() < 1e-10);
        }
    }

    fn congruence_rect(a: &CsrMatrix, m: &CsrMatrix, b: &CsrMatrix) -> DMatrix<f64> {
        a.to_dmatrix().transpose() * m.to_dmatrix() * b.to_dmatrix()
    }

    #[test]
    fn interior_functions_satisfy_even_derivative_conditions() {
        let p = 6;
        let (sp, u) = split(p, 3);
        let free = clamp_constraints(&u.space, BoundaryCondition::FirstBiharmonic).unwrap();
        let e0 = sp.e0.to_dmatrix();
        for j in 0..sp.n0() {
            let mut coeffs = vec![0.0; u.space.dim()];
            for i in 0..sp.n_free() {
                coeffs[free.start + i] = e0[(i, j)];
            }
            for x in [0.0, 1.0] {
                for k in [0, 2, 4] {
                    let v = u.space.eval_spline(&coeffs, x, k).unwrap();
                    let scale = u.space.h().powi(-(k as i32));
                    assert!(v.abs() < 1e-10 * scale, "col {j} deriv {k} at {x}: {v}");
                }
            }
        }
    }

    #[test]
    fn interior_embedding_is_identity_away_from_ends() {
        let (sp, _) = split(4, 5);
        let e0 = sp.e0.to_dmatrix();
        let nontrivial = (0..sp.n0())
            .filter(|&j| {
                let col = e0.column(j);
                col.iter().filter(|v| **v != 0.0).count() != 1 || col.iter().any(|v| *v != 0.0 && *v != 1.0)
            })
            .count();
        assert!(nontrivial <= 2 * 4);
    }

    #[test]
    fn inverse_inequality_bound() {
        let (sp, _) = split(4, 4);
        let c = sp.inverse_inequality_constant().unwrap() * sp.h.powi(4);
        assert!(c <= 144.0, "{c}");
        assert!(c > 1.0);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        assert!(matches!(nullspace(&c), Err(Error::RankDeficient { rank: 1, rows: 2 })));
    }
}
