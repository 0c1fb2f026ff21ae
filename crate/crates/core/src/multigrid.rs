//! Geometric multigrid on nested tensor spline spaces and the PCG driver.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_physical, parameter_operators, BoundaryCondition, ConstrainedSpace};
use crate::error::{Error, Result};
use crate::geometry::GeometryMap;
use crate::linalg::{kron_apply_factors, pcg, CsrMatrix, DenseCholesky, LinearOperator, PcgOutcome};
use crate::smoothers::{
    default_tau_mass, GaussSeidelSmoother, HybridSmoother, SigmaRule, Smoother, SmootherKind, SubspaceMassSmoother,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CycleType {
    #[default]
    V,
    W,
    TwoGrid,
}

impl fmt::Display for CycleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::V => "v",
            Self::W => "w",
            Self::TwoGrid => "two-grid",
        })
    }
}

impl FromStr for CycleType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "v" => Ok(Self::V),
            "w" => Ok(Self::W),
            "two-grid" | "twogrid" | "tg" => Ok(Self::TwoGrid),
            _ => Err(Error::InvalidArgument(format!("unknown cycle '{s}' (expected v, w or two-grid)"))),
        }
    }
}

/// Cycle shape and smoothing counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleSpec {
    pub cycle: CycleType,
    pub pre: usize,
    pub post: usize,
}

impl Default for CycleSpec {
    fn default() -> Self {
        Self {
            cycle: CycleType::V,
            pre: 1,
            post: 1,
        }
    }
}

impl CycleSpec {
    pub fn new(cycle: CycleType, pre: usize, post: usize) -> Result<Self> {
        if pre + post == 0 {
            return Err(Error::InvalidArgument("a cycle needs at least one smoothing step".into()));
        }
        Ok(Self { cycle, pre, post })
    }

    /// `ν` pre- and `ν` post-smoothing steps.
    pub fn symmetric(cycle: CycleType, nu: usize) -> Result<Self> {
        Self::new(cycle, nu, nu)
    }
}

/// Everything needed to build a hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    pub dim: usize,
    pub degree: usize,
    /// Coarsest level; `None` picks [`default_level_min`].
    pub level_min: Option<u32>,
    pub level_max: u32,
    pub bc: BoundaryCondition,
    pub smoother: SmootherKind,
    pub sigma: SigmaRule,
    /// Damping of the standalone mass smoother.
    pub tau: f64,
    /// Damping of the mass step inside the hybrid smoother; `None` uses the
    /// per-dimension default.
    pub tau_mass: Option<f64>,
}

impl HierarchyConfig {
    pub fn new(dim: usize, degree: usize, level_max: u32, smoother: SmootherKind) -> Self {
        Self {
            dim,
            degree,
            level_min: None,
            level_max,
            bc: BoundaryCondition::FirstBiharmonic,
            smoother,
            sigma: SigmaRule::Paper,
            tau: 1.0,
            tau_mass: None,
        }
    }

    pub fn coarsest(&self) -> u32 {
        self.level_min.unwrap_or_else(|| default_level_min(self.degree, self.bc))
    }
}

/// Coarsest level used when none is given: the first level of at least two
/// elements whose constrained space is nonempty.
pub fn default_level_min(degree: usize, bc: BoundaryCondition) -> u32 {
    let removed = match bc {
        BoundaryCondition::FirstBiharmonic => 4,
        BoundaryCondition::SecondBiharmonic => 2,
    };
    (1..).find(|&l| (1usize << l) + degree > removed).unwrap()
}

/// One level of the hierarchy.
pub struct Level {
    pub level: u32,
    pub space: ConstrainedSpace,
    /// Operator the cycle smooths and restricts residuals of.
    pub operator: Arc<dyn LinearOperator + Send + Sync>,
    /// The physical stiffness when it is the level operator.
    pub physical: Option<Arc<CsrMatrix>>,
    smoother: Option<Box<dyn Smoother>>,
    /// Univariate factors of the prolongation from the next coarser level.
    prolongation: Vec<CsrMatrix>,
    restriction: Vec<CsrMatrix>,
    exact: OnceLock<Result<DenseCholesky>>,
}

fn replay(e: &Error) -> Error {
    match e {
        Error::NotSpd { pivot, value } => Error::NotSpd {
            pivot: *pivot,
            value: *value,
        },
        other => Error::InvalidArgument(other.to_string()),
    }
}

impl Level {
    pub fn ndofs(&self) -> usize {
        self.space.ndofs()
    }

    /// `P u` for a coarse vector `u`.
    pub fn prolongate(&self, coarse: &[f64]) -> Vec<f64> {
        let f: Vec<&CsrMatrix> = self.prolongation.iter().collect();
        kron_apply_factors(&f, coarse)
    }

    /// `P' r` for a fine vector `r`.
    pub fn restrict(&self, fine: &[f64]) -> Vec<f64> {
        let f: Vec<&CsrMatrix> = self.restriction.iter().collect();
        kron_apply_factors(&f, fine)
    }

    pub fn prolongation_factors(&self) -> &[CsrMatrix] {
        &self.prolongation
    }

    /// Dense Cholesky factor of the level operator, computed on first use.
    pub fn exact_solver(&self) -> Result<&DenseCholesky> {
        self.exact
            .get_or_init(|| DenseCholesky::new(&operator_to_dense(self.operator.as_ref())))
            .as_ref()
            .map_err(replay)
    }
}

fn operator_to_dense(op: &dyn LinearOperator) -> nalgebra::DMatrix<f64> {
    let n = op.ncols();
    let mut a = nalgebra::DMatrix::zeros(op.nrows(), n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; op.nrows()];
    for j in 0..n {
        e[j] = 1.0;
        op.apply_into(&e, &mut col);
        a.set_column(j, &nalgebra::DVector::from_column_slice(&col));
        e[j] = 0.0;
    }
    // exact symmetry for the factorization
    (&a + a.transpose()) * 0.5
}

/// Levels `ℓ_min..=ℓ_max` with smoothers, transfer operators and the coarse
/// solver.
pub struct MultigridHierarchy {
    config: HierarchyConfig,
    levels: Vec<Level>,
}

impl fmt::Debug for MultigridHierarchy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultigridHierarchy")
            .field("config", &self.config)
            .field("dofs", &self.levels.iter().map(Level::ndofs).collect::<Vec<_>>())
            .finish()
    }
}

impl MultigridHierarchy {
    pub fn build(config: &HierarchyConfig, geometry: &GeometryMap) -> Result<Self> {
        if config.degree < 3 {
            return Err(Error::InvalidArgument(format!(
                "the multigrid solver needs degree >= 3, got {}",
                config.degree
            )));
        }
        if geometry.dim() != config.dim {
            return Err(Error::InvalidArgument(format!(
                "geometry dimension {} does not match requested dimension {}",
                geometry.dim(),
                config.dim
            )));
        }
        let lmin = config.coarsest();
        if lmin > config.level_max {
            return Err(Error::InvalidArgument(format!(
                "coarsest level {lmin} above finest level {}",
                config.level_max
            )));
        }
        let mut levels = Vec::new();
        let mut space = ConstrainedSpace::uniform(config.dim, config.degree, lmin, config.bc)?;
        if space.ndofs() == 0 {
            return Err(Error::EmptySpace {
                level: lmin,
                degree: config.degree,
            });
        }
        let mut prolongation = Vec::new();
        for level in lmin..=config.level_max {
            if level > lmin {
                let coarse: &Level = levels.last().unwrap();
                prolongation = coarse.space.prolongation_factors()?;
                space = coarse.space.refined()?;
            }
            let restriction = prolongation.iter().map(CsrMatrix::transpose).collect();
            levels.push(Self::build_level(
                config,
                geometry,
                level,
                space.clone(),
                level > lmin,
                prolongation.clone(),
                restriction,
            )?);
        }
        let h = Self { config: config.clone(), levels };
        h.levels[0].exact_solver()?;
        Ok(h)
    }

    fn build_level(
        config: &HierarchyConfig,
        geometry: &GeometryMap,
        level: u32,
        space: ConstrainedSpace,
        smoothed: bool,
        prolongation: Vec<CsrMatrix>,
        restriction: Vec<CsrMatrix>,
    ) -> Result<Level> {
        let d = config.dim;
        let h = space.spaces()[0].h();
        let sigma = config.sigma.sigma(d, config.smoother, h);
        let (operator, physical, smoother): (Arc<dyn LinearOperator + Send + Sync>, _, Option<Box<dyn Smoother>>) =
            match config.smoother {
                SmootherKind::Gs | SmootherKind::Hybrid => {
                    let a = Arc::new(assemble_physical(&space, geometry)?);
                    let smoother: Option<Box<dyn Smoother>> = if !smoothed {
                        None
                    } else if config.smoother == SmootherKind::Gs {
                        Some(Box::new(GaussSeidelSmoother::new(a.clone())?))
                    } else {
                        let tau_mass = config.tau_mass.unwrap_or_else(|| default_tau_mass(d));
                        let mass = SubspaceMassSmoother::for_space(&space, sigma, tau_mass)?;
                        Some(Box::new(HybridSmoother::new(GaussSeidelSmoother::new(a.clone())?, Arc::new(mass))))
                    };
                    (a.clone(), Some(a), smoother)
                }
                SmootherKind::Mass => {
                    let (bbar, _) = parameter_operators(&space)?;
                    let op: Arc<dyn LinearOperator + Send + Sync> = Arc::new(bbar);
                    let smoother: Option<Box<dyn Smoother>> = if smoothed {
                        Some(Box::new(
                            SubspaceMassSmoother::for_space(&space, sigma, config.tau)?.with_operator(op.clone()),
                        ))
                    } else {
                        None
                    };
                    (op, None, smoother)
                }
            };
        Ok(Level {
            level,
            space,
            operator,
            physical,
            smoother,
            prolongation,
            restriction,
            exact: OnceLock::new(),
        })
    }

    pub fn config(&self) -> &HierarchyConfig {
        &self.config
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn level_min(&self) -> u32 {
        self.levels[0].level
    }

    pub fn level_max(&self) -> u32 {
        self.levels.last().unwrap().level
    }

    pub fn level(&self, level: u32) -> Result<&Level> {
        self.index(level).map(|i| &self.levels[i])
    }

    fn index(&self, level: u32) -> Result<usize> {
        if level < self.level_min() || level > self.level_max() {
            return Err(Error::InvalidArgument(format!(
                "level {level} outside the hierarchy range {}..={}",
                self.level_min(),
                self.level_max()
            )));
        }
        Ok((level - self.level_min()) as usize)
    }

    /// Physical stiffness on `level`: the level operator in Gauss-Seidel and
    /// hybrid mode, assembled on demand in mass mode.
    pub fn physical_operator(&self, level: u32, geometry: &GeometryMap) -> Result<Arc<CsrMatrix>> {
        let l = self.level(level)?;
        match &l.physical {
            Some(a) => Ok(a.clone()),
            None => Ok(Arc::new(assemble_physical(&l.space, geometry)?)),
        }
    }

    /// Applies one cycle on `level` to `u` in place.
    pub fn cycle(&self, spec: &CycleSpec, level: u32, u: &mut [f64], rhs: &[f64]) -> Result<()> {
        let idx = self.index(level)?;
        if u.len() != self.levels[idx].ndofs() || rhs.len() != u.len() {
            return Err(Error::ShapeMismatch {
                expected: self.levels[idx].ndofs(),
                found: u.len(),
            });
        }
        self.cycle_at(spec, idx, u, rhs)
    }

    fn cycle_at(&self, spec: &CycleSpec, idx: usize, u: &mut [f64], rhs: &[f64]) -> Result<()> {
        let lvl = &self.levels[idx];
        if idx == 0 {
            u.copy_from_slice(&lvl.exact_solver()?.solve(rhs));
            return Ok(());
        }
        let smoother = lvl.smoother.as_ref().expect("smoother on every non-coarsest level");
        for _ in 0..spec.pre {
            smoother.smooth(u, rhs);
        }
        let mut r = vec![0.0; u.len()];
        lvl.operator.residual_into(u, rhs, &mut r);
        let rc = lvl.restrict(&r);
        let mut ec = vec![0.0; rc.len()];
        match spec.cycle {
            CycleType::V => self.cycle_at(spec, idx - 1, &mut ec, &rc)?,
            CycleType::W => {
                self.cycle_at(spec, idx - 1, &mut ec, &rc)?;
                if idx - 1 > 0 {
                    self.cycle_at(spec, idx - 1, &mut ec, &rc)?;
                }
            }
            CycleType::TwoGrid => ec = self.levels[idx - 1].exact_solver()?.solve(&rc),
        }
        for (ui, ci) in u.iter_mut().zip(lvl.prolongate(&ec)) {
            *ui += ci;
        }
        for _ in 0..spec.post {
            smoother.smooth(u, rhs);
        }
        Ok(())
    }

    /// One cycle with zero initial guess: the preconditioner `C r`.
    pub fn precondition(&self, spec: &CycleSpec, level: u32, r: &[f64]) -> Result<Vec<f64>> {
        let mut z = vec![0.0; r.len()];
        self.cycle(spec, level, &mut z, r)?;
        Ok(z)
    }

    /// PCG on `a` preconditioned with one cycle on `level`.
    pub fn pcg_solve(
        &self,
        spec: &CycleSpec,
        level: u32,
        a: &dyn LinearOperator,
        rhs: &[f64],
        x0: &[f64],
        tol: f64,
        max_iter: usize,
    ) -> Result<PcgOutcome> {
        let idx = self.index(level)?;
        let mut failure = None;
        let out = pcg(
            |x, y| a.apply_into(x, y),
            |r, z| {
                z.fill(0.0);
                if let Err(e) = self.cycle_at(spec, idx, z, r) {
                    failure.get_or_insert(e);
                }
            },
            rhs,
            x0,
            tol,
            max_iter,
        )?;
        match failure {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }
}

/// Uniform random start vector in `[-1, 1]^n` from a seeded stream.
pub fn random_initial_guess(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

/// Result of [`solve`].
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub residual_history: Vec<f64>,
}

/// Table-style solve: PCG on the physical stiffness of `level`, one cycle as
/// preconditioner, random initial guess from `seed`.
pub fn solve(
    hierarchy: &MultigridHierarchy,
    spec: &CycleSpec,
    level: u32,
    physical: &CsrMatrix,
    rhs: &[f64],
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<SolveOutcome> {
    if rhs.iter().all(|&v| v == 0.0) {
        return Ok(SolveOutcome {
            solution: vec![0.0; rhs.len()],
            iterations: 0,
            converged: true,
            residual_history: vec![0.0],
        });
    }
    let x0 = random_initial_guess(rhs.len(), seed);
    let out = hierarchy.pcg_solve(spec, level, physical, rhs, &x0, tol, max_iter)?;
    Ok(SolveOutcome {
        solution: out.x,
        iterations: out.iterations,
        converged: out.converged,
        residual_history: out.residual_history,
    })
}

/// Energy-norm contraction of the two-grid method on `level` with `nu`
/// smoothing steps: `q = ‖K S^ν‖_A`, computed as the square root of the
/// largest eigenvalue of the symmetrized error propagation `S^ν K S^ν`.
pub fn two_grid_contraction(hierarchy: &MultigridHierarchy, level: u32, nu: usize) -> Result<f64> {
    let spec = CycleSpec::symmetric(CycleType::TwoGrid, nu)?;
    let lvl = hierarchy.level(level)?;
    if level == hierarchy.level_min() {
        return Err(Error::InvalidArgument("two-grid contraction needs a coarser level".into()));
    }
    let n = lvl.ndofs();
    let zero = vec![0.0; n];
    let a = operator_to_dense(lvl.operator.as_ref());
    let mut e = nalgebra::DMatrix::zeros(n, n);
    let mut col = vec![0.0; n];
    for j in 0..n {
        col.fill(0.0);
        col[j] = 1.0;
        hierarchy.cycle(&spec, level, &mut col, &zero)?;
        e.set_column(j, &nalgebra::DVector::from_column_slice(&col));
    }
    // A E is symmetric for an A-self-adjoint E
    let ae = &a * e;
    let ae = (&ae + ae.transpose()) * 0.5;
    let ev = crate::linalg::dense::generalized_eigenvalues(&ae, &a)?;
    let lam = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(lam.sqrt())
}
