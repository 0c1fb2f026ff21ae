//! Univariate B-spline spaces on the unit interval.
//!
//! A [`SplineSpace`] is the space of degree-`p` splines with maximum smoothness
//! on a uniform grid of `m = 2^level` elements, represented in the B-spline
//! basis of the open (clamped) knot vector. Basis evaluation works for any
//! nondecreasing knot vector, which the geometry module reuses for patches
//! whose knots are not dyadic.

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

/// Levels beyond this would overflow the element count on 32-bit targets and
/// are far outside anything a dense tensor grid can hold anyway.
const MAX_LEVEL: u32 = 24;

/// Open-uniform spline space of degree `p` on `2^level` elements of `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineSpace {
    degree: usize,
    level: u32,
    elements: usize,
    knots: Vec<f64>,
}

/// Values and derivatives of the `p + 1` basis functions that may be nonzero
/// at one point.
///
/// `values[r][k]` is the `r`-th derivative of basis function `first + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval {
    pub first: usize,
    pub values: Vec<Vec<f64>>,
}

impl BasisEval {
    /// Derivative `deriv` of global basis function `index`, zero outside the
    /// local support window.
    pub fn get(&self, deriv: usize, index: usize) -> f64 {
        if index < self.first {
            return 0.0;
        }
        self.values
            .get(deriv)
            .and_then(|row| row.get(index - self.first))
            .copied()
            .unwrap_or(0.0)
    }
}

impl SplineSpace {
    pub fn new(degree: usize, level: u32) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidArgument(format!(
                "spline degree must be at least 1, got {degree}"
            )));
        }
        if level > MAX_LEVEL {
            return Err(Error::InvalidArgument(format!(
                "refinement level {level} exceeds the supported maximum {MAX_LEVEL}"
            )));
        }
        let elements = 1usize << level;
        let mut knots = Vec::with_capacity(elements + 2 * degree + 1);
        knots.extend(std::iter::repeat(0.0).take(degree + 1));
        knots.extend((1..elements).map(|i| i as f64 / elements as f64));
        knots.extend(std::iter::repeat(1.0).take(degree + 1));
        Ok(Self {
            degree,
            level,
            elements,
            knots,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    /// Grid size `h = 1/m`.
    pub fn h(&self) -> f64 {
        1.0 / self.elements as f64
    }

    /// Number of basis functions, `m + p`.
    pub fn dim(&self) -> usize {
        self.elements + self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Index of the element containing `x`; right-continuous, with `x = 1`
    /// assigned to the last element.
    pub fn element_of(&self, x: f64) -> usize {
        let e = (x * self.elements as f64).floor();
        if e < 0.0 {
            0
        } else {
            (e as usize).min(self.elements - 1)
        }
    }

    /// Basis functions and their derivatives up to `max_deriv` at `x`.
    pub fn eval_basis(&self, x: f64, max_deriv: usize) -> Result<BasisEval> {
        check_unit(x)?;
        let e = self.element_of(x);
        let span = e + self.degree;
        let values = basis_derivatives(&self.knots, self.degree, span, x, max_deriv);
        Ok(BasisEval { first: e, values })
    }

    /// Basis evaluation on a known element, used by quadrature loops where the
    /// point is interior to `element` and the lookup is redundant.
    pub(crate) fn eval_on_element(&self, element: usize, x: f64, max_deriv: usize) -> Vec<Vec<f64>> {
        basis_derivatives(&self.knots, self.degree, element + self.degree, x, max_deriv)
    }

    /// Value of the spline with coefficients `coeffs` (derivative `deriv`) at `x`.
    pub fn eval_spline(&self, coeffs: &[f64], x: f64, deriv: usize) -> Result<f64> {
        if coeffs.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: self.dim(),
                found: coeffs.len(),
            });
        }
        let b = self.eval_basis(x, deriv)?;
        Ok(b.values[deriv]
            .iter()
            .enumerate()
            .map(|(k, v)| v * coeffs[b.first + k])
            .sum())
    }

    /// Greville abscissae (knot averages), one per basis function.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.degree;
        (0..self.dim())
            .map(|i| self.knots[i + 1..=i + p].iter().sum::<f64>() / p as f64)
            .collect()
    }

    /// The space obtained by one dyadic refinement.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.degree, self.level + 1)
    }

    /// Matrix `R` (fine dim x coarse dim) of the canonical embedding of this
    /// space into its dyadic refinement: `fine(R c) == coarse(c)` pointwise.
    ///
    /// Built by inserting the new midpoints one at a time (Boehm's algorithm).
    pub fn refinement_matrix(&self) -> Result<CsrMatrix> {
        let fine = self.refined()?;
        let p = self.degree;
        let n = self.dim();
        // rows[i] holds row i of the accumulated insertion operator.
        let mut rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut r = vec![0.0; n];
                r[i] = 1.0;
                r
            })
            .collect();
        let mut knots = self.knots.clone();
        for e in 0..self.elements {
            let t = (2 * e + 1) as f64 / fine.elements as f64;
            // span k with knots[k] <= t < knots[k+1]
            let k = knots.partition_point(|&v| v <= t) - 1;
            let mut next = Vec::with_capacity(rows.len() + 1);
            for i in 0..=rows.len() {
                let row = if i + p <= k {
                    rows[i].clone()
                } else if i > k {
                    rows[i - 1].clone()
                } else {
                    let a = (t - knots[i]) / (knots[i + p] - knots[i]);
                    rows[i]
                        .iter()
                        .zip(&rows[i - 1])
                        .map(|(x, y)| a * x + (1.0 - a) * y)
                        .collect()
                };
                next.push(row);
            }
            rows = next;
            knots.insert(k + 1, t);
        }
        debug_assert_eq!(rows.len(), fine.dim());
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        CsrMatrix::from_triplets(fine.dim(), n, triplets)
    }
}

fn check_unit(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!(
            "evaluation point {x} lies outside [0, 1]"
        )));
    }
    Ok(())
}

/// Knot span index `k` with `knots[k] <= x < knots[k+1]` for a clamped knot
/// vector of degree `p`; `x` at the right end maps to the last nonempty span.
pub fn find_span(knots: &[f64], p: usize, x: f64) -> usize {
    let n = knots.len() - p - 1;
    if x >= knots[n] {
        // last span with positive length
        let mut k = n - 1;
        while k > p && knots[k] == knots[k + 1] {
            k -= 1;
        }
        return k;
    }
    if x <= knots[p] {
        let mut k = p;
        while k + 1 < n && knots[k] == knots[k + 1] {
            k += 1;
        }
        return k;
    }
    knots.partition_point(|&v| v <= x) - 1
}

/// Derivatives `0..=nd` of the `p + 1` nonzero B-splines on knot span `span`.
///
/// Standard triangular-table recursion: the basis values are computed by the
/// Cox–de Boor recurrence and derivatives from the stored knot differences.
/// Derivatives of order above `p` are zero.
pub fn basis_derivatives(knots: &[f64], p: usize, span: usize, x: f64, nd: usize) -> Vec<Vec<f64>> {
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            // lower triangle holds knot differences
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }

    let mut ders = vec![vec![0.0; p + 1]; nd + 1];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }
    let top = nd.min(p);
    let mut a = vec![vec![0.0; p + 1]; 2];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=top {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = p - k;
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if (r as isize - 1) <= pk as isize { k - 1 } else { p - r };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut factor = p as f64;
    for k in 1..=top {
        for v in ders[k].iter_mut() {
            *v *= factor;
        }
        factor *= (p - k) as f64;
    }
    ders
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Newton iteration from the Chebyshev-like initial guess
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[n - 1 - i] = 0.5 * (1.0 + z);
        weights[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent evaluation: value of spline `c` at `x` by de Boor's
    /// algorithm (repeated affine combination of control values).
    fn de_boor(knots: &[f64], p: usize, c: &[f64], x: f64) -> f64 {
        let k = find_span(knots, p, x);
        let mut d: Vec<f64> = (0..=p).map(|j| c[j + k - p]).collect();
        for r in 1..=p {
            for j in (r..=p).rev() {
                let i = j + k - p;
                let a = (x - knots[i]) / (knots[i + p + 1 - r] - knots[i]);
                d[j] = (1.0 - a) * d[j - 1] + a * d[j];
            }
        }
        d[p]
    }

    #[test]
    fn space_dimensions() {
        let s = SplineSpace::new(3, 5).unwrap();
        assert_eq!((s.elements(), s.dim()), (32, 35));
        assert_eq!(s.h(), 1.0 / 32.0);
        let s = SplineSpace::new(1, 0).unwrap();
        assert_eq!(s.knots(), &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(s.dim(), 2);
        assert_eq!(SplineSpace::new(10, 8).unwrap().dim(), 266);
        assert!(SplineSpace::new(0, 2).is_err());
    }

    #[test]
    fn hat_peak() {
        let s = SplineSpace::new(1, 1).unwrap();
        let b = s.eval_basis(0.5, 0).unwrap();
        assert_eq!(b.get(0, 1), 1.0);
        assert_eq!(b.get(0, 0), 0.0);
        assert_eq!(b.get(0, 2), 0.0);
    }

    #[test]
    fn rejects_points_outside_unit_interval() {
        let s = SplineSpace::new(2, 2).unwrap();
        assert!(s.eval_basis(1.0 + 1e-12, 0).is_err());
        assert!(s.eval_basis(-0.1, 0).is_err());
        assert!(s.eval_basis(1.0, 2).is_ok());
    }

    #[test]
    fn derivatives_match_de_boor_finite_differences() {
        // p=2, m=2 at x=0.25 and scattered points: derivatives of the spline
        // with random coefficients against central differences of de Boor.
        let s = SplineSpace::new(2, 1).unwrap();
        let c = [0.3, -1.2, 0.7, 2.0];
        for &x in &[0.25, 0.1, 0.37, 0.61, 0.9] {
            let v = s.eval_spline(&c, x, 0).unwrap();
            assert!((v - de_boor(s.knots(), 2, &c, x)).abs() < 1e-14);
            let step = 1e-5;
            let fd1 = (de_boor(s.knots(), 2, &c, x + step) - de_boor(s.knots(), 2, &c, x - step)) / (2.0 * step);
            assert!((s.eval_spline(&c, x, 1).unwrap() - fd1).abs() < 1e-8);
            let fd2 = (de_boor(s.knots(), 2, &c, x + step) - 2.0 * v + de_boor(s.knots(), 2, &c, x - step))
                / (step * step);
            assert!((s.eval_spline(&c, x, 2).unwrap() - fd2).abs() < 1e-4);
        }
    }

    #[test]
    fn derivatives_above_degree_vanish() {
        let s = SplineSpace::new(2, 2).unwrap();
        let b = s.eval_basis(0.3, 4).unwrap();
        assert!(b.values[3].iter().chain(&b.values[4]).all(|&v| v == 0.0));
    }

    #[test]
    fn knot_side_convention_for_top_derivative() {
        // Third derivative of a cubic jumps at interior knots; evaluation at a
        // knot takes the value from the element to the right.
        let s = SplineSpace::new(3, 2).unwrap();
        let c: Vec<f64> = (0..s.dim()).map(|i| ((i * i) % 5) as f64).collect();
        let at = s.eval_spline(&c, 0.5, 3).unwrap();
        let right = s.eval_spline(&c, 0.5 + 1e-9, 3).unwrap();
        let left = s.eval_spline(&c, 0.5 - 1e-9, 3).unwrap();
        assert!((at - right).abs() < 1e-6);
        assert!((at - left).abs() > 1e-3);
        // lower derivatives are continuous
        let l2 = s.eval_spline(&c, 0.5 - 1e-9, 2).unwrap();
        let r2 = s.eval_spline(&c, 0.5, 2).unwrap();
        assert!((l2 - r2).abs() < 1e-6);
    }

    #[test]
    fn refinement_of_hats_is_midpoint_interpolation() {
        let s = SplineSpace::new(1, 1).unwrap();
        let r = s.refinement_matrix().unwrap().to_dense();
        assert_eq!(r.len(), 5);
        assert_eq!(r[0], vec![1.0, 0.0, 0.0]);
        assert_eq!(r[1], vec![0.5, 0.5, 0.0]);
        assert_eq!(r[2], vec![0.0, 1.0, 0.0]);
        assert_eq!(r[3], vec![0.0, 0.5, 0.5]);
        assert_eq!(r[4], vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn refinement_point_evaluation_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for (p, level) in [(2, 1), (3, 2), (5, 3), (10, 2)] {
            let coarse = SplineSpace::new(p, level).unwrap();
            let fine = coarse.refined().unwrap();
            let r = coarse.refinement_matrix().unwrap();
            assert_eq!(r.get(0, 0), 1.0);
            let c: Vec<f64> = (0..coarse.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let fc = r.matvec(&c);
            for _ in 0..50 {
                let x: f64 = rng.gen();
                let a = coarse.eval_spline(&c, x, 0).unwrap();
                let b = fine.eval_spline(&fc, x, 0).unwrap();
                assert!((a - b).abs() < 1e-12, "p={p} level={level} x={x}");
            }
            for i in 0..r.nrows() {
                let row: f64 = r.row(i).map(|(_, v)| v).sum();
                assert!((row - 1.0).abs() < 1e-13);
                assert!(r.row(i).all(|(_, v)| v > 0.0));
                assert!(r.row(i).count() <= p + 2);
            }
        }
    }

    #[test]
    fn greville_collocation_reproduces_polynomials() {
        // Collocating x^k at the Greville points gives a spline equal to x^k.
        for p in 1..=5 {
            let s = SplineSpace::new(p, 3).unwrap();
            let g = s.greville();
            let n = s.dim();
            let mut a = nalgebra::DMatrix::zeros(n, n);
            for (i, &x) in g.iter().enumerate() {
                let b = s.eval_basis(x, 0).unwrap();
                for (k, v) in b.values[0].iter().enumerate() {
                    a[(i, b.first + k)] = *v;
                }
            }
            let lu = a.lu();
            for k in 0..=p {
                let rhs = nalgebra::DVector::from_iterator(n, g.iter().map(|x| x.powi(k as i32)));
                let c = lu.solve(&rhs).unwrap();
                for t in 0..=40 {
                    let x = t as f64 / 40.0;
                    let v = s.eval_spline(c.as_slice(), x, 0).unwrap();
                    assert!((v - x.powi(k as i32)).abs() < 1e-10, "p={p} k={k}");
                }
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_exactly() {
        for n in 1..=12 {
            let (x, w) = gauss_legendre(n);
            for k in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                assert!((q - 1.0 / (k + 1) as f64).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn partition_of_unity(p in 1usize..=10, level in 0u32..=6, x in 0.0f64..=1.0) {
                let s = SplineSpace::new(p, level).unwrap();
                let b = s.eval_basis(x, p.min(4)).unwrap();
                prop_assert_eq!(b.values[0].len(), p + 1);
                let sum: f64 = b.values[0].iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
                for r in 1..b.values.len() {
                    let scale = s.elements().pow(r as u32) as f64 * (p as f64).powi(r as i32);
                    let sum: f64 = b.values[r].iter().sum();
                    prop_assert!(sum.abs() < 1e-12 * scale.max(1.0));
                }
            }

            #[test]
            fn two_scale_exactness(p in 1usize..=6, level in 0u32..=4, seed in 0u64..1000, x in 0.0f64..=1.0) {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let coarse = SplineSpace::new(p, level).unwrap();
                let r = coarse.refinement_matrix().unwrap();
                let c: Vec<f64> = (0..coarse.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let fine = coarse.refined().unwrap();
                let a = coarse.eval_spline(&c, x, 0).unwrap();
                let b = fine.eval_spline(&r.matvec(&c), x, 0).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
