//! Iteration-count tables, single solves with CSV export, and the
//! verification suite as a report file.

use std::fmt::{self, Write as _};
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_rhs, model_load, BoundaryCondition, ConstrainedSpace};
use crate::error::{Error, Result};
use crate::geometry::{builtin_domain, BuiltinDomain, GeometryMap};
use crate::multigrid::{solve, CycleSpec, CycleType, HierarchyConfig, MultigridHierarchy};
use crate::smoothers::{SigmaRule, SmootherKind};
use crate::verify::{InequalityReport, VerifySweep};

/// Named sweeps mirroring the published tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TablePreset {
    Para2d,
    Para3d,
    Geo2d,
    Geo3d,
}

impl TablePreset {
    pub const ALL: [TablePreset; 4] = [Self::Para2d, Self::Para3d, Self::Geo2d, Self::Geo3d];

    pub fn name(self) -> &'static str {
        match self {
            Self::Para2d => "para2d",
            Self::Para3d => "para3d",
            Self::Geo2d => "geo2d",
            Self::Geo3d => "geo3d",
        }
    }

    pub fn domain(self) -> BuiltinDomain {
        match self {
            Self::Para2d => BuiltinDomain::UnitSquare,
            Self::Para3d => BuiltinDomain::UnitCube,
            Self::Geo2d => BuiltinDomain::QuarterAnnulus2d,
            Self::Geo3d => BuiltinDomain::QuarterAnnulus3d,
        }
    }
}

impl fmt::Display for TablePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TablePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown table '{s}' (para2d, para3d, geo2d, geo3d)")))
    }
}

/// Output format of a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Md,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "md" | "markdown" => Ok(Self::Md),
            _ => Err(Error::InvalidArgument(format!("unknown format '{s}' (csv or md)"))),
        }
    }
}

/// One sweep over degrees and levels with a fixed smoother.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub d: usize,
    /// Built-in domain name or path to a geometry file.
    pub geometry: String,
    pub smoother: SmootherKind,
    pub p_min: usize,
    pub p_max: usize,
    pub level_min: u32,
    pub level_max: u32,
    /// Coarsest multigrid level; `None` uses the per-degree default.
    pub coarse_level: Option<u32>,
    pub bc: BoundaryCondition,
    pub sigma: SigmaRule,
    pub tau: f64,
    pub tau_mass: Option<f64>,
    pub tol: f64,
    pub seed: u64,
    pub cycle: CycleType,
    pub nu: usize,
    pub max_iter: usize,
    /// Cells whose estimated footprint exceeds this are skipped.
    pub memory_limit_mb: u64,
}

impl ExperimentConfig {
    pub fn preset(table: TablePreset, smoother: SmootherKind) -> Self {
        let domain = table.domain();
        let (p_max, level_min, level_max) = if domain.dim() == 2 { (10, 5, 8) } else { (7, 3, 6) };
        Self {
            d: domain.dim(),
            geometry: domain.name().to_string(),
            smoother,
            p_min: 3,
            p_max,
            level_min,
            level_max,
            coarse_level: None,
            bc: BoundaryCondition::FirstBiharmonic,
            sigma: SigmaRule::Paper,
            tau: 1.0,
            tau_mass: None,
            tol: crate::DEFAULT_REL_TOL,
            seed: 0,
            cycle: CycleType::V,
            nu: 1,
            max_iter: 2000,
            memory_limit_mb: 4096,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(2..=3).contains(&self.d) {
            return bad(format!("dimension must be 2 or 3, got {}", self.d));
        }
        if self.p_min < 3 || self.p_min > self.p_max {
            return bad(format!("degree range {}..={} must be nonempty and start at 3 or above", self.p_min, self.p_max));
        }
        if self.level_min > self.level_max {
            return bad(format!("level range {}..={} is empty", self.level_min, self.level_max));
        }
        if let Some(c) = self.coarse_level {
            if c >= self.level_min {
                return bad(format!("coarse level {c} must lie below the first table level {}", self.level_min));
            }
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("tolerance must lie in (0, 1), got {}", self.tol));
        }
        if !(self.tau > 0.0) || self.tau_mass.is_some_and(|t| !(t > 0.0)) {
            return bad("damping parameters must be positive".into());
        }
        if self.nu == 0 {
            return bad("need at least one smoothing step".into());
        }
        Ok(())
    }

    /// Resolves `geometry` to a map of the configured dimension.
    pub fn load_geometry(&self) -> Result<GeometryMap> {
        let g = match builtin_domain(&self.geometry) {
            Ok(g) => g,
            Err(_) if std::path::Path::new(&self.geometry).exists() => GeometryMap::load(&self.geometry)?,
            Err(e) => return Err(e),
        };
        if g.dim() != self.d {
            return Err(Error::InvalidArgument(format!(
                "geometry '{}' is {}-dimensional but d = {}",
                self.geometry,
                g.dim(),
                self.d
            )));
        }
        Ok(g)
    }

    pub fn cycle_spec(&self) -> Result<CycleSpec> {
        CycleSpec::symmetric(self.cycle, self.nu)
    }

    fn hierarchy_config(&self, p: usize, level_max: u32) -> HierarchyConfig {
        let mut cfg = HierarchyConfig::new(self.d, p, level_max, self.smoother);
        cfg.level_min = self.coarse_level;
        cfg.bc = self.bc;
        cfg.sigma = self.sigma;
        cfg.tau = self.tau;
        cfg.tau_mass = self.tau_mass;
        cfg
    }
}

/// Rough storage need of one table cell in bytes: the physical stiffness in
/// CSR form with `(2p+1)^d` entries per row, with headroom for the coarser
/// levels and smoother state.
pub fn memory_estimate(d: usize, p: usize, level: u32, bc: BoundaryCondition) -> u64 {
    let removed = match bc {
        BoundaryCondition::FirstBiharmonic => 4,
        BoundaryCondition::SecondBiharmonic => 2,
    };
    let n = ((1u64 << level) + p as u64).saturating_sub(removed);
    let dofs = n.pow(d as u32);
    let row = (2 * p as u64 + 1).pow(d as u32);
    dofs * row * 12 * 5 / 2
}

/// Outcome of one table cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "kebab-case")]
pub enum CellStatus {
    Converged,
    NotConverged,
    Skipped(String),
    Failed(String),
}

impl fmt::Display for CellStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Converged => f.write_str("converged"),
            Self::NotConverged => f.write_str("not converged"),
            Self::Skipped(r) => write!(f, "skipped: {r}"),
            Self::Failed(r) => write!(f, "failed: {r}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub p: usize,
    pub level: u32,
    pub dofs: usize,
    pub nnz: usize,
    pub iterations: Option<usize>,
    pub seconds: f64,
    pub status: CellStatus,
}

impl Cell {
    fn empty(p: usize, level: u32, status: CellStatus) -> Self {
        Self {
            p,
            level,
            dofs: 0,
            nnz: 0,
            iterations: None,
            seconds: 0.0,
            status,
        }
    }

    pub fn converged(&self) -> bool {
        self.status == CellStatus::Converged
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableResult {
    pub config: ExperimentConfig,
    pub cells: Vec<Cell>,
}

impl TableResult {
    pub fn cell(&self, p: usize, level: u32) -> Option<&Cell> {
        self.cells.iter().find(|c| c.p == p && c.level == level)
    }

    /// Iteration count of a converged cell.
    pub fn iterations(&self, p: usize, level: u32) -> Option<usize> {
        self.cell(p, level).filter(|c| c.converged()).and_then(|c| c.iterations)
    }

    pub fn to_csv(&self) -> String {
        let c = &self.config;
        let mut out = String::from("d,geometry,smoother,p,level,dofs,nnz,iterations,seconds,converged,status\n");
        for cell in &self.cells {
            let iters = cell.iterations.map(|i| i.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{:.3},{},\"{}\"",
                c.d,
                c.geometry,
                c.smoother,
                cell.p,
                cell.level,
                cell.dofs,
                cell.nnz,
                iters,
                cell.seconds,
                cell.converged(),
                cell.status.to_string().replace('"', "'")
            );
        }
        out
    }

    /// Levels down, degrees across.
    pub fn to_markdown(&self) -> String {
        let c = &self.config;
        let mut out = format!("{} smoother, {} (d = {})\n\n", c.smoother, c.geometry, c.d);
        let ps: Vec<usize> = (c.p_min..=c.p_max).collect();
        out.push_str("| ℓ \\ p |");
        for p in &ps {
            let _ = write!(out, " {p} |");
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(ps.len()));
        out.push('\n');
        for l in c.level_min..=c.level_max {
            let _ = write!(out, "| {l} |");
            for &p in &ps {
                let text = match self.cell(p, l) {
                    Some(Cell { status: CellStatus::Converged, iterations: Some(i), .. }) => i.to_string(),
                    Some(Cell { status: CellStatus::NotConverged, .. }) => format!(">{}", c.max_iter),
                    Some(Cell { status: CellStatus::Skipped(_), .. }) => "skipped".into(),
                    _ => "failed".into(),
                };
                let _ = write!(out, " {text} |");
            }
            out.push('\n');
        }
        let notes: Vec<String> = self
            .cells
            .iter()
            .filter(|cell| matches!(cell.status, CellStatus::Skipped(_) | CellStatus::Failed(_)))
            .map(|cell| format!("- p = {}, ℓ = {}: {}", cell.p, cell.level, cell.status))
            .collect();
        if !notes.is_empty() {
            out.push('\n');
            out.push_str(&notes.join("\n"));
            out.push('\n');
        }
        out
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Md => self.to_markdown(),
        }
    }
}

/// Runs every `(p, ℓ)` cell of `config`. One hierarchy is built per degree
/// and reused for all its levels; failures are recorded per cell.
pub fn run_table(config: &ExperimentConfig) -> Result<TableResult> {
    config.validate()?;
    let geometry = config.load_geometry()?;
    let spec = config.cycle_spec()?;
    let limit = config.memory_limit_mb.saturating_mul(1 << 20);
    let mut cells = Vec::new();
    for p in config.p_min..=config.p_max {
        let levels: Vec<u32> = (config.level_min..=config.level_max).collect();
        let fits = |l: u32| memory_estimate(config.d, p, l, config.bc) <= limit;
        let Some(top) = levels.iter().copied().filter(|&l| fits(l)).max() else {
            cells.extend(levels.iter().map(|&l| Cell::empty(p, l, CellStatus::Skipped("memory".into()))));
            continue;
        };
        let hierarchy = match MultigridHierarchy::build(&config.hierarchy_config(p, top), &geometry) {
            Ok(h) => h,
            Err(e) => {
                cells.extend(levels.iter().map(|&l| {
                    let status = if fits(l) { CellStatus::Failed(e.to_string()) } else { CellStatus::Skipped("memory".into()) };
                    Cell::empty(p, l, status)
                }));
                continue;
            }
        };
        for &l in &levels {
            if !fits(l) {
                cells.push(Cell::empty(p, l, CellStatus::Skipped("memory".into())));
                continue;
            }
            cells.push(run_cell(config, &hierarchy, &geometry, &spec, p, l));
        }
    }
    Ok(TableResult {
        config: config.clone(),
        cells,
    })
}

fn run_cell(
    config: &ExperimentConfig,
    hierarchy: &MultigridHierarchy,
    geometry: &GeometryMap,
    spec: &CycleSpec,
    p: usize,
    level: u32,
) -> Cell {
    let start = Instant::now();
    let attempt = || -> Result<Cell> {
        let a = hierarchy.physical_operator(level, geometry)?;
        let space = &hierarchy.level(level)?.space;
        let rhs = assemble_rhs(space, geometry, &model_load(config.d))?;
        let out = solve(hierarchy, spec, level, &a, &rhs, config.seed, config.tol, config.max_iter)?;
        Ok(Cell {
            p,
            level,
            dofs: space.ndofs(),
            nnz: a.nnz(),
            iterations: Some(out.iterations),
            seconds: 0.0,
            status: if out.converged { CellStatus::Converged } else { CellStatus::NotConverged },
        })
    };
    let mut cell = attempt().unwrap_or_else(|e| Cell::empty(p, level, CellStatus::Failed(e.to_string())));
    cell.seconds = start.elapsed().as_secs_f64();
    cell
}

/// Solution of a single solve together with samples on a parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub p: usize,
    pub level: u32,
    pub dofs: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Coefficients of the free basis functions, last direction fastest.
    pub coefficients: Vec<f64>,
    /// `(parameter point, physical point, value)` on a uniform grid.
    pub samples: Vec<(Vec<f64>, Vec<f64>, f64)>,
}

/// Solves for the degree `config.p_min` on level `config.level_max` with
/// the model load and samples the result on `samples^d` parameter points.
pub fn solve_once(config: &ExperimentConfig, samples: usize) -> Result<SolveReport> {
    solve_with_load(config, samples, &model_load(config.d))
}

/// [`solve_once`] with an arbitrary load, evaluated at physical points.
pub fn solve_with_load(config: &ExperimentConfig, samples: usize, load: &dyn Fn(&[f64]) -> f64) -> Result<SolveReport> {
    config.validate()?;
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples per direction".into()));
    }
    let geometry = config.load_geometry()?;
    let (p, level) = (config.p_min, config.level_max);
    let hierarchy = MultigridHierarchy::build(&config.hierarchy_config(p, level), &geometry)?;
    let a = hierarchy.physical_operator(level, &geometry)?;
    let space: &ConstrainedSpace = &hierarchy.level(level)?.space;
    let rhs = assemble_rhs(space, &geometry, load)?;
    let out = solve(&hierarchy, &config.cycle_spec()?, level, &a, &rhs, config.seed, config.tol, config.max_iter)?;
    let d = config.d;
    let mut grid = Vec::with_capacity(samples.pow(d as u32));
    let mut idx = vec![0usize; d];
    for flat in 0..samples.pow(d as u32) {
        crate::assembly::unflatten(flat, &vec![samples; d], &mut idx);
        let s: Vec<f64> = idx.iter().map(|&i| i as f64 / (samples - 1) as f64).collect();
        let x = geometry.eval(&s)?.point;
        let (u, _) = space.eval(&out.solution, &s)?;
        grid.push((s, x[..d].to_vec(), u));
    }
    Ok(SolveReport {
        p,
        level,
        dofs: space.ndofs(),
        iterations: out.iterations,
        converged: out.converged,
        coefficients: out.solution,
        samples: grid,
    })
}

impl SolveReport {
    pub fn write_coefficients_csv(&self, w: &mut dyn Write) -> Result<()> {
        writeln!(w, "index,coefficient")?;
        for (i, c) in self.coefficients.iter().enumerate() {
            writeln!(w, "{i},{c:.17e}")?;
        }
        Ok(())
    }

    pub fn write_samples_csv(&self, w: &mut dyn Write) -> Result<()> {
        let d = self.samples.first().map_or(0, |s| s.0.len());
        let mut header: Vec<String> = (1..=d).map(|k| format!("s{k}")).collect();
        header.extend((1..=d).map(|k| format!("x{k}")));
        header.push("u".into());
        writeln!(w, "{}", header.join(","))?;
        for (s, x, u) in &self.samples {
            let fields: Vec<String> = s.iter().chain(x).chain(std::iter::once(u)).map(|v| format!("{v:.17e}")).collect();
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// Runs the verification sweep and writes one JSON report per line.
/// Returns whether every report passed.
pub fn run_verify(sweep: &VerifySweep, tighten: f64, out: &mut dyn Write) -> Result<bool> {
    let reports: Vec<InequalityReport> = sweep.run(tighten)?;
    for r in &reports {
        writeln!(out, "{}", r.to_json_line())?;
    }
    Ok(reports.iter().all(|r| r.pass))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(smoother: SmootherKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::preset(TablePreset::Para2d, smoother);
        c.p_max = 4;
        c.level_min = 2;
        c.level_max = 3;
        c
    }

    #[test]
    fn presets_parse() {
        for t in TablePreset::ALL {
            assert_eq!(t.name().parse::<TablePreset>().unwrap(), t);
            ExperimentConfig::preset(t, SmootherKind::Gs).validate().unwrap();
        }
        assert!("table9".parse::<TablePreset>().is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = small(SmootherKind::Gs);
        c.p_min = 5;
        assert!(c.validate().is_err());
        let mut c = small(SmootherKind::Gs);
        c.coarse_level = Some(2);
        assert!(c.validate().is_err());
        let mut c = small(SmootherKind::Gs);
        c.geometry = "quarter-annulus-3d".into();
        assert!(c.load_geometry().is_err());
    }

    #[test]
    fn every_cell_is_accounted_for() {
        let mut c = small(SmootherKind::Mass);
        c.memory_limit_mb = 0;
        let t = run_table(&c).unwrap();
        assert_eq!(t.cells.len(), 4);
        assert!(t.cells.iter().all(|cell| matches!(cell.status, CellStatus::Skipped(_))));
        let c = small(SmootherKind::Gs);
        let t = run_table(&c).unwrap();
        assert!(t.cells.iter().all(Cell::converged));
        let csv = t.to_csv();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("d,geometry,smoother,p,level,dofs,nnz,iterations,seconds,converged"));
        assert!(t.to_markdown().contains("| 3 |"));
    }

    #[test]
    fn memory_estimate_grows_with_level() {
        let bc = BoundaryCondition::FirstBiharmonic;
        assert!(memory_estimate(3, 5, 5, bc) > memory_estimate(3, 5, 4, bc) * 7);
    }
}
