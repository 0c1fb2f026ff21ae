//! Numerical checks of the estimates the solvers rest on: spectral
//! equivalence of the physical and reduced operators, the inverse inequality
//! on the interior spline space, stability of the subspace splitting, the
//! Gauss-Seidel pinch bound, H²-projection error orders and two-grid
//! contraction.
//!
//! Everything here is dense and meant for small problems (a few thousand
//! unknowns at most). Each check produces [`InequalityReport`]s that
//! serialize to one JSON object per line.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble_physical, assemble_univariate, clamp_constraints, parameter_operators, BoundaryCondition,
    ConstrainedSpace,
};
use crate::error::Result;
use crate::geometry::{builtin_domain, GeometryMap};
use crate::linalg::dense::{generalized_eigenvalues, symmetric_eigenvalues};
use crate::linalg::{CsrMatrix, DenseCholesky};
use crate::multigrid::{two_grid_contraction, HierarchyConfig, MultigridHierarchy};
use crate::smoothers::{build_splitting, SmootherKind, SubspaceMassSmoother};
use crate::spline::{gauss_legendre, SplineSpace};

/// Parameters a report was measured at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub d: usize,
    pub p: usize,
    pub level: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<usize>,
}

impl Params {
    pub fn new(d: usize, p: usize, level: u32) -> Self {
        Self { d, p, level, nu: None }
    }
}

/// Closed interval a measurement must fall in; a missing side is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Bound {
    pub fn at_most(v: f64) -> Self {
        Self { lower: None, upper: Some(v) }
    }

    pub fn at_least(v: f64) -> Self {
        Self { lower: Some(v), upper: None }
    }

    pub fn between(lo: f64, hi: f64) -> Self {
        Self { lower: Some(lo), upper: Some(hi) }
    }

    /// Shrinks the interval by `factor <= 1`: upper bounds are multiplied by
    /// it, positive lower bounds divided by it.
    fn tightened(self, factor: f64) -> Self {
        Self {
            lower: self.lower.map(|l| if l > 0.0 { l / factor } else { l }),
            upper: self.upper.map(|u| u * factor),
        }
    }

    pub fn contains(&self, v: f64, tolerance: f64) -> bool {
        self.lower.map_or(true, |l| v >= l - tolerance) && self.upper.map_or(true, |u| v <= u + tolerance)
    }
}

/// One measured quantity against its bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub statement: String,
    pub params: Params,
    pub measured: f64,
    pub bound: Bound,
    pub tolerance: f64,
    pub pass: bool,
}

impl InequalityReport {
    pub fn new(statement: &str, params: Params, measured: f64, bound: Bound, tolerance: f64) -> Self {
        Self {
            statement: statement.to_string(),
            params,
            measured,
            bound,
            tolerance,
            pass: measured.is_finite() && bound.contains(measured, tolerance),
        }
    }

    fn tightened(mut self, factor: f64) -> Self {
        if factor != 1.0 {
            self.bound = self.bound.tightened(factor);
            self.pass = self.measured.is_finite() && self.bound.contains(self.measured, self.tolerance);
        }
        self
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Dense `(B_h, B̄_h)` on the identity map.
fn physical_and_reduced(d: usize, p: usize, level: u32) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let space = ConstrainedSpace::uniform(d, p, level, BoundaryCondition::FirstBiharmonic)?;
    let b = assemble_physical(&space, &GeometryMap::identity(d))?.to_dmatrix();
    let (reduced, _) = parameter_operators(&space)?;
    Ok((b, reduced.to_csr()?.to_dmatrix()))
}

/// Extreme generalized eigenvalues of `(B_h, B̄_h)` on the unit square or
/// cube; both should lie in `[1, d]`.
pub fn check_spectral_equivalence(d: usize, p: usize, level: u32) -> Result<Vec<InequalityReport>> {
    let (b, bbar) = physical_and_reduced(d, p, level)?;
    let ev = generalized_eigenvalues(&b, &bbar)?;
    let params = Params::new(d, p, level);
    let tol = 1e-8;
    Ok(vec![
        InequalityReport::new("spectral-equivalence-min", params, ev[0], Bound::at_least(1.0), tol),
        InequalityReport::new("spectral-equivalence-max", params, *ev.last().unwrap(), Bound::at_most(d as f64), tol),
    ])
}

/// `h⁴ λ_max(M₀⁻¹ B₀)` on the interior space, bounded by 144.
pub fn check_inverse_inequality(p: usize, level: u32) -> Result<InequalityReport> {
    let s = SplineSpace::new(p, level)?;
    let u = assemble_univariate(&s);
    let free = clamp_constraints(&s, BoundaryCondition::FirstBiharmonic)?;
    let split = build_splitting(&u, free)?;
    let scaled = split.inverse_inequality_constant()? * split.h.powi(4);
    Ok(InequalityReport::new(
        "inverse-inequality",
        Params::new(1, p, level),
        scaled,
        Bound::at_most(144.0),
        144.0 * 1e-6,
    ))
}

/// Dense L²-projections `Q_α = E_α (E_αᵀ M̄ E_α)⁻¹ E_αᵀ M̄` onto the tensor
/// subspaces, together with `M̄` and `B̄`.
fn subspace_projections(d: usize, p: usize, level: u32) -> Result<(Vec<DMatrix<f64>>, DMatrix<f64>, DMatrix<f64>)> {
    let space = ConstrainedSpace::uniform(d, p, level, BoundaryCondition::FirstBiharmonic)?;
    let (reduced, mass) = parameter_operators(&space)?;
    let m = mass.to_csr()?.to_dmatrix();
    let bbar = reduced.to_csr()?.to_dmatrix();
    let smoother = SubspaceMassSmoother::for_space(&space, 1.0, 1.0)?;
    let mut qs = Vec::new();
    for alpha in smoother.subspaces() {
        let e = smoother.embedding_dense(&alpha).expect("listed subspace");
        let et_m = e.transpose() * &m;
        let gram = &et_m * &e;
        let chol = DenseCholesky::new(&gram)?;
        let mut coeff = et_m.clone();
        for mut col in coeff.column_iter_mut() {
            chol.solve_in_place(col.as_mut_slice());
        }
        qs.push(e * coeff);
    }
    Ok((qs, m, bbar))
}

/// Largest relative deviation of `Σ_α ‖Q_α u‖²` from `‖u‖²` (L² norms) over
/// a few random vectors.
pub fn check_splitting_identity(d: usize, p: usize, level: u32, seed: u64) -> Result<InequalityReport> {
    let (qs, m, _) = subspace_projections(d, p, level)?;
    let n = m.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let u = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let total = u.dot(&(&m * &u));
        let parts: f64 = qs
            .iter()
            .map(|q| {
                let v = q * &u;
                v.dot(&(&m * &v))
            })
            .sum();
        worst = worst.max((parts - total).abs() / total);
    }
    Ok(InequalityReport::new(
        "splitting-l2-identity",
        Params::new(d, p, level),
        worst,
        Bound::at_most(1e-10),
        0.0,
    ))
}

/// Extreme eigenvalues of `(Σ_α Q_αᵀ B̄ Q_α, B̄)`: the two-sided constants of
/// the splitting in the reduced energy.
pub fn splitting_bracket(d: usize, p: usize, level: u32) -> Result<(f64, f64)> {
    let (qs, _, bbar) = subspace_projections(d, p, level)?;
    let n = bbar.nrows();
    let mut s = DMatrix::zeros(n, n);
    for q in &qs {
        s += q.transpose() * &bbar * q;
    }
    let s = (&s + s.transpose()) * 0.5;
    let ev = generalized_eigenvalues(&s, &bbar)?;
    Ok((ev[0], *ev.last().unwrap()))
}

/// Splitting bracket over a degree sweep at a fixed level. Reports the
/// Cauchy-Schwarz lower bound `2^{-d}` per degree and the growth of the
/// bracket width `λ_max/λ_min` from the first to the last degree.
pub fn check_splitting_stability(d: usize, degrees: &[usize], level: u32) -> Result<Vec<InequalityReport>> {
    let mut out = Vec::new();
    let mut widths = Vec::new();
    for &p in degrees {
        let (lo, hi) = splitting_bracket(d, p, level)?;
        let params = Params::new(d, p, level);
        out.push(InequalityReport::new(
            "splitting-bracket-min",
            params,
            lo,
            Bound::at_least(0.5f64.powi(d as i32)),
            1e-10,
        ));
        out.push(InequalityReport::new("splitting-bracket-max", params, hi, Bound { lower: None, upper: None }, 0.0));
        widths.push(hi / lo);
    }
    if let (Some(first), Some(last)) = (widths.first(), widths.last()) {
        out.push(InequalityReport::new(
            "splitting-bracket-growth",
            Params::new(d, *degrees.last().unwrap(), level),
            last / first,
            Bound::at_most(1.1),
            0.0,
        ));
    }
    Ok(out)
}

/// Dense symmetric Gauss-Seidel operator `(D - C) D⁻¹ (D - Cᵀ)` of `B`.
pub fn gauss_seidel_operator(b: &DMatrix<f64>) -> DMatrix<f64> {
    let dinv = DMatrix::from_diagonal(&b.diagonal().map(|v| 1.0 / v));
    b.lower_triangle() * dinv * b.upper_triangle()
}

/// `λ_min(L_h - B_h)` for symmetric Gauss-Seidel on the physical stiffness.
pub fn check_gauss_seidel_pinch(d: usize, p: usize, level: u32, geometry: &GeometryMap) -> Result<InequalityReport> {
    let space = ConstrainedSpace::uniform(d, p, level, BoundaryCondition::FirstBiharmonic)?;
    let b = assemble_physical(&space, geometry)?.to_dmatrix();
    let l = gauss_seidel_operator(&b);
    let diff = &l - &b;
    let ev = symmetric_eigenvalues(&((&diff + diff.transpose()) * 0.5));
    Ok(InequalityReport::new(
        "gauss-seidel-pinch",
        Params::new(d, p, level),
        ev[0],
        Bound::at_least(0.0),
        1e-9,
    ))
}

/// Test function `x²(1-x)² sin 7x` and its derivatives up to order 4.
pub fn projection_test_function(x: f64, deriv: usize) -> f64 {
    let q = [
        x * x * (1.0 - x) * (1.0 - x),
        2.0 * x - 6.0 * x * x + 4.0 * x * x * x,
        2.0 - 12.0 * x + 12.0 * x * x,
        -12.0 + 24.0 * x,
        24.0,
    ];
    let (s, c) = (7.0 * x).sin_cos();
    let trig = [s, 7.0 * c, -49.0 * s, -343.0 * c, 2401.0 * s];
    let binom = [[1.0, 0.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0, 0.0], [1.0, 3.0, 3.0, 1.0, 0.0], [1.0, 4.0, 6.0, 4.0, 1.0]];
    (0..=deriv).map(|k| binom[deriv][k] * q[k] * trig[deriv - k]).sum()
}

/// Errors of the H²-projection onto the clamped spline space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionErrors {
    pub h: f64,
    /// `|u - Πu|_{H²}`.
    pub h2: f64,
    /// `‖u - Πu‖_{L²}`.
    pub l2: f64,
    /// `|u|_{H⁴}` and `|u|_{H²}` of the projected function.
    pub u_h4: f64,
    pub u_h2: f64,
}

/// H²-seminorm projection of `u` (given with its derivatives by `u(x, k)`)
/// onto the clamped degree-`p` space on `2^level` elements.
pub fn h2_projection_errors(p: usize, level: u32, u: &dyn Fn(f64, usize) -> f64) -> Result<ProjectionErrors> {
    let s = SplineSpace::new(p, level)?;
    let sys = assemble_univariate(&s);
    let free = clamp_constraints(&s, BoundaryCondition::FirstBiharmonic)?;
    let nf = free.len();
    let (nodes, weights) = gauss_legendre(p + 8);
    let h = s.h();
    let mut rhs = vec![0.0; nf];
    for e in 0..s.elements() {
        for (xq, wq) in nodes.iter().zip(&weights) {
            let x = (e as f64 + xq) * h;
            let b = s.eval_basis(x, 2)?;
            let u2 = u(x, 2);
            for (k, v) in b.values[2].iter().enumerate() {
                let i = b.first + k;
                if free.contains(&i) {
                    rhs[i - free.start] += wq * h * u2 * v;
                }
            }
        }
    }
    let a = CsrMatrix::to_dmatrix(&crate::assembly::restrict_banded(&sys.stiffness, free.clone()));
    let c = DenseCholesky::new(&a)?.solve(&rhs);
    let coeffs: Vec<f64> = (0..s.dim())
        .map(|i| if free.contains(&i) { c[i - free.start] } else { 0.0 })
        .collect();
    let (mut h2, mut l2, mut u_h4, mut u_h2) = (0.0, 0.0, 0.0, 0.0);
    for e in 0..s.elements() {
        for (xq, wq) in nodes.iter().zip(&weights) {
            let x = (e as f64 + xq) * h;
            let w = wq * h;
            let v0 = s.eval_spline(&coeffs, x, 0)?;
            let v2 = s.eval_spline(&coeffs, x, 2)?;
            h2 += w * (u(x, 2) - v2).powi(2);
            l2 += w * (u(x, 0) - v0).powi(2);
            u_h4 += w * u(x, 4).powi(2);
            u_h2 += w * u(x, 2).powi(2);
        }
    }
    Ok(ProjectionErrors {
        h,
        h2: h2.sqrt(),
        l2: l2.sqrt(),
        u_h4: u_h4.sqrt(),
        u_h2: u_h2.sqrt(),
    })
}

/// Error constants and convergence orders of the H²-projection of
/// `x²(1-x)² sin 7x` over `levels` (consecutive).
///
/// Reports `|e|_{H²} / (h²|u|_{H⁴}) <= 2`, `‖e‖_{L²} / (h²|u|_{H²}) <= 2`,
/// and error ratios between consecutive levels of at least 3.5 (order h² or
/// better) in both norms.
pub fn check_projection_order(p: usize, levels: &[u32]) -> Result<Vec<InequalityReport>> {
    let errs = levels
        .iter()
        .map(|&l| h2_projection_errors(p, l, &projection_test_function))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for (&l, e) in levels.iter().zip(&errs) {
        let params = Params::new(1, p, l);
        let h2 = e.h * e.h;
        out.push(InequalityReport::new("projection-h2-constant", params, e.h2 / (h2 * e.u_h4), Bound::at_most(2.0), 0.0));
        out.push(InequalityReport::new("projection-l2-constant", params, e.l2 / (h2 * e.u_h2), Bound::at_most(2.0), 0.0));
    }
    for (w, l) in errs.windows(2).zip(levels) {
        let params = Params::new(1, p, *l);
        out.push(InequalityReport::new("projection-h2-order", params, w[0].h2 / w[1].h2, Bound::at_least(3.5), 0.0));
        out.push(InequalityReport::new("projection-l2-order", params, w[0].l2 / w[1].l2, Bound::at_least(3.5), 0.0));
    }
    Ok(out)
}

/// Two-grid energy contraction `q(ν)` of the mass-smoothed method on the unit
/// square or cube for each `ν`.
pub fn two_grid_contractions(d: usize, p: usize, level: u32, nus: &[usize]) -> Result<Vec<f64>> {
    let mut cfg = HierarchyConfig::new(d, p, level, SmootherKind::Mass);
    cfg.level_min = Some(level - 1);
    let h = MultigridHierarchy::build(&cfg, &GeometryMap::identity(d))?;
    nus.iter().map(|&nu| two_grid_contraction(&h, level, nu)).collect()
}

/// `q(ν) < 1` for each `ν` and `q` strictly decreasing along `nus`.
pub fn check_two_grid(d: usize, p: usize, level: u32, nus: &[usize]) -> Result<Vec<InequalityReport>> {
    let qs = two_grid_contractions(d, p, level, nus)?;
    let mut out = Vec::new();
    for (&nu, &q) in nus.iter().zip(&qs) {
        let params = Params { nu: Some(nu), ..Params::new(d, p, level) };
        out.push(InequalityReport::new("two-grid-contraction", params, q, Bound::at_most(1.0), -1e-12));
    }
    for (w, &nu) in qs.windows(2).zip(&nus[1..]) {
        let params = Params { nu: Some(nu), ..Params::new(d, p, level) };
        out.push(InequalityReport::new("two-grid-decrease", params, w[1] / w[0], Bound::at_most(1.0), -1e-12));
    }
    Ok(out)
}

/// Parameter sweep of the full suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySweep {
    /// `(d, p, level)` triples for the spectral equivalence on the identity map.
    pub spectral: Vec<(usize, usize, u32)>,
    pub inverse_degrees: Vec<usize>,
    pub inverse_levels: Vec<u32>,
    /// `(d, p, level)` triples for the L² identity of the splitting.
    pub splitting: Vec<(usize, usize, u32)>,
    pub bracket_dim: usize,
    pub bracket_degrees: Vec<usize>,
    pub bracket_level: u32,
    /// `(d, p, level)` triples for the pinch bound on the quarter annulus.
    pub pinch: Vec<(usize, usize, u32)>,
    pub projection_degrees: Vec<usize>,
    pub projection_levels: Vec<u32>,
    pub two_grid: (usize, usize, u32),
    pub two_grid_nus: Vec<usize>,
    pub seed: u64,
}

impl Default for VerifySweep {
    fn default() -> Self {
        let pairs2 = [(3, 2), (3, 3), (4, 3), (5, 3), (8, 3), (3, 4), (4, 4), (6, 4)];
        let pairs3 = [(3, 2), (4, 2), (5, 2), (6, 2), (8, 2), (3, 3), (4, 3)];
        let both: Vec<(usize, usize, u32)> = pairs2
            .iter()
            .map(|&(p, l)| (2, p, l))
            .chain(pairs3.iter().map(|&(p, l)| (3, p, l)))
            .collect();
        let mut spectral = both.clone();
        spectral.push((3, 3, 1));
        Self {
            spectral,
            inverse_degrees: (3..=10).collect(),
            inverse_levels: (2..=6).collect(),
            splitting: both.clone(),
            bracket_dim: 2,
            bracket_degrees: (3..=8).collect(),
            bracket_level: 4,
            pinch: both,
            projection_degrees: vec![3, 4, 5],
            projection_levels: (3..=7).collect(),
            two_grid: (2, 4, 4),
            two_grid_nus: vec![1, 2, 4, 8, 16],
            seed: 0,
        }
    }
}

impl VerifySweep {
    /// A reduced sweep that runs in a few seconds.
    pub fn quick() -> Self {
        Self {
            spectral: vec![(2, 3, 2), (2, 4, 3), (3, 3, 1), (3, 4, 2)],
            inverse_degrees: vec![3, 5, 8],
            inverse_levels: vec![2, 4],
            splitting: vec![(2, 3, 3), (2, 5, 2), (3, 4, 2)],
            bracket_dim: 2,
            bracket_degrees: vec![3, 4],
            bracket_level: 3,
            pinch: vec![(2, 3, 3), (3, 3, 2)],
            projection_degrees: vec![3],
            projection_levels: vec![3, 4, 5],
            two_grid: (2, 3, 3),
            two_grid_nus: vec![1, 2],
            seed: 0,
        }
    }

    /// Runs every check. A `tighten` factor below 1 shrinks all bounds and is
    /// used as a negative control.
    pub fn run(&self, tighten: f64) -> Result<Vec<InequalityReport>> {
        let mut out = Vec::new();
        for &(d, p, l) in &self.spectral {
            out.extend(check_spectral_equivalence(d, p, l)?);
        }
        for &p in &self.inverse_degrees {
            for &l in &self.inverse_levels {
                out.push(check_inverse_inequality(p, l)?);
            }
        }
        for &(d, p, l) in &self.splitting {
            out.push(check_splitting_identity(d, p, l, self.seed)?);
        }
        if !self.bracket_degrees.is_empty() {
            out.extend(check_splitting_stability(self.bracket_dim, &self.bracket_degrees, self.bracket_level)?);
        }
        for &(d, p, l) in &self.pinch {
            let g = builtin_domain(if d == 2 { "quarter-annulus-2d" } else { "quarter-annulus-3d" })?;
            out.push(check_gauss_seidel_pinch(d, p, l, &g)?);
        }
        for &p in &self.projection_degrees {
            out.extend(check_projection_order(p, &self.projection_levels)?);
        }
        if !self.two_grid_nus.is_empty() {
            let (d, p, l) = self.two_grid;
            out.extend(check_two_grid(d, p, l, &self.two_grid_nus)?);
        }
        Ok(out.into_iter().map(|r| r.tightened(tighten)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_term_is_first_derivative_kronecker() {
        // (u_xx, v_yy) = (u_xy, v_xy) for clamped u, v, so B - B̄ = 2 K₁ ⊗ K₁
        let (p, level) = (4, 3);
        let (b, bbar) = physical_and_reduced(2, p, level).unwrap();
        let s = SplineSpace::new(p, level).unwrap();
        let free = clamp_constraints(&s, BoundaryCondition::FirstBiharmonic).unwrap();
        let (nodes, weights) = gauss_legendre(p + 1);
        let mut k1 = DMatrix::zeros(free.len(), free.len());
        for e in 0..s.elements() {
            for (xq, wq) in nodes.iter().zip(&weights) {
                let x = (e as f64 + xq) * s.h();
                let v = s.eval_basis(x, 1).unwrap();
                for (a, da) in v.values[1].iter().enumerate() {
                    for (c, dc) in v.values[1].iter().enumerate() {
                        let (i, j) = (v.first + a, v.first + c);
                        if free.contains(&i) && free.contains(&j) {
                            k1[(i - free.start, j - free.start)] += wq * s.h() * da * dc;
                        }
                    }
                }
            }
        }
        let diff = &b - &bbar - k1.kronecker(&k1) * 2.0;
        assert!(diff.amax() < 1e-9 * b.amax(), "{}", diff.amax());
    }

    #[test]
    fn spectral_equivalence_small() {
        for r in check_spectral_equivalence(2, 3, 2).unwrap() {
            assert!(r.pass, "{r:?}");
        }
        for r in check_spectral_equivalence(3, 3, 1).unwrap() {
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn test_function_derivatives_match_differences() {
        let h = 1e-4;
        for &x in &[0.1, 0.37, 0.8] {
            for k in 0..4 {
                let fd = (projection_test_function(x + h, k) - projection_test_function(x - h, k)) / (2.0 * h);
                let exact = projection_test_function(x, k + 1);
                assert!((fd - exact).abs() < 1e-5 * exact.abs().max(1.0), "k={k} x={x}");
            }
        }
    }

    #[test]
    fn projection_reproduces_splines() {
        // x²(1-x)² is a clamped quartic
        let u = |x: f64, k: usize| match k {
            0 => x * x * (1.0 - x) * (1.0 - x),
            1 => 2.0 * x - 6.0 * x * x + 4.0 * x * x * x,
            2 => 2.0 - 12.0 * x + 12.0 * x * x,
            3 => -12.0 + 24.0 * x,
            _ => 24.0,
        };
        let e = h2_projection_errors(4, 3, &u).unwrap();
        assert!(e.h2 < 1e-11 && e.l2 < 1e-12, "{e:?}");
    }

    #[test]
    fn tightening_produces_failures() {
        let sweep = VerifySweep::quick();
        let loose = sweep.run(1.0).unwrap();
        assert!(loose.iter().all(|r| r.pass), "{:?}", loose.iter().find(|r| !r.pass));
        let tight = sweep.run(0.5).unwrap();
        assert!(tight.iter().any(|r| !r.pass));
    }

    #[test]
    fn reports_are_json_lines() {
        let r = check_inverse_inequality(3, 2).unwrap();
        let line = r.to_json_line();
        assert!(!line.contains('\n'));
        let back: InequalityReport = serde_json::from_str(&line).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn gauss_seidel_operator_dominates_on_tiny_matrix() {
        let b = DMatrix::from_row_slice(3, 3, &[4.0, -1.0, 0.5, -1.0, 3.0, -1.0, 0.5, -1.0, 2.0]);
        let l = gauss_seidel_operator(&b);
        let ev = symmetric_eigenvalues(&(&l - &b));
        assert!(ev[0] > -1e-14);
    }
}
