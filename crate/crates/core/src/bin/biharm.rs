use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use biharmonic_mg::assembly::BoundaryCondition;
use biharmonic_mg::experiments::{run_table, run_verify, solve_once, ExperimentConfig, OutputFormat, TablePreset};
use biharmonic_mg::geometry::BuiltinDomain;
use biharmonic_mg::multigrid::CycleType;
use biharmonic_mg::smoothers::{SigmaRule, SmootherKind};
use biharmonic_mg::verify::VerifySweep;

/// Multigrid solvers for spline discretizations of the biharmonic equation.
#[derive(Parser)]
#[command(name = "biharm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Iteration counts over a degree/level grid.
    Table {
        /// Start from a named sweep: para2d, para3d, geo2d or geo3d.
        #[arg(long, env = "BIHARM_TABLE")]
        table: Option<TablePreset>,
        #[command(flatten)]
        opts: SolverArgs,
        #[arg(long, env = "BIHARM_FORMAT", default_value = "csv")]
        format: OutputFormat,
        /// Output file; stdout when absent.
        #[arg(long, env = "BIHARM_OUT")]
        out: Option<PathBuf>,
    },
    /// Dense checks of the estimates behind the solvers, as JSON lines.
    Verify {
        /// Multiply every upper bound by this factor (and divide positive
        /// lower bounds by it).
        #[arg(long, env = "BIHARM_TIGHTEN", default_value_t = 1.0)]
        tighten: f64,
        /// Small sweep that finishes in seconds.
        #[arg(long, env = "BIHARM_QUICK")]
        quick: bool,
        #[arg(long, env = "BIHARM_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "BIHARM_OUT")]
        out: Option<PathBuf>,
    },
    /// One solve; writes coefficients.csv and samples.csv into --out.
    Solve {
        #[command(flatten)]
        opts: SolverArgs,
        /// Degree (overrides --p-min).
        #[arg(long, env = "BIHARM_P")]
        p: Option<usize>,
        /// Level (overrides --level-max).
        #[arg(long, env = "BIHARM_LEVEL")]
        level: Option<u32>,
        /// Sample points per direction.
        #[arg(long, env = "BIHARM_SAMPLES", default_value_t = 21)]
        samples: usize,
        #[arg(long, env = "BIHARM_OUT", default_value = "solution")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, env = "BIHARM_D")]
    d: Option<usize>,
    /// Built-in domain (unit-square, unit-cube, quarter-annulus-2d,
    /// quarter-annulus-3d) or a geometry JSON file.
    #[arg(long, env = "BIHARM_GEOMETRY")]
    geometry: Option<String>,
    #[arg(long, env = "BIHARM_SMOOTHER")]
    smoother: Option<SmootherKind>,
    #[arg(long, env = "BIHARM_P_MIN")]
    p_min: Option<usize>,
    #[arg(long, env = "BIHARM_P_MAX")]
    p_max: Option<usize>,
    #[arg(long, env = "BIHARM_LEVEL_MIN")]
    level_min: Option<u32>,
    #[arg(long, env = "BIHARM_LEVEL_MAX")]
    level_max: Option<u32>,
    /// Coarsest multigrid level.
    #[arg(long, env = "BIHARM_COARSE_LEVEL")]
    coarse_level: Option<u32>,
    /// first (clamped) or second (simply supported).
    #[arg(long, env = "BIHARM_BC")]
    bc: Option<BoundaryCondition>,
    /// paper, paper-2d, paper-3d, theory or a value c giving σ = c h⁻⁴.
    #[arg(long, env = "BIHARM_SIGMA")]
    sigma: Option<SigmaRule>,
    #[arg(long, env = "BIHARM_TAU")]
    tau: Option<f64>,
    #[arg(long, env = "BIHARM_TAU_MASS")]
    tau_mass: Option<f64>,
    #[arg(long, env = "BIHARM_TOL")]
    tol: Option<f64>,
    #[arg(long, env = "BIHARM_SEED")]
    seed: Option<u64>,
    /// v, w or two-grid.
    #[arg(long, env = "BIHARM_CYCLE")]
    cycle: Option<CycleType>,
    /// Pre- and post-smoothing steps.
    #[arg(long, env = "BIHARM_NU")]
    nu: Option<usize>,
    #[arg(long, env = "BIHARM_MAX_ITER")]
    max_iter: Option<usize>,
    #[arg(long, env = "BIHARM_MEMORY_LIMIT_MB")]
    memory_limit_mb: Option<u64>,
}

impl SolverArgs {
    fn config(&self, table: Option<TablePreset>) -> ExperimentConfig {
        let builtin_dim = self
            .geometry
            .as_deref()
            .and_then(|g| g.parse::<BuiltinDomain>().ok())
            .map(BuiltinDomain::dim);
        let preset = table.unwrap_or(match self.d.or(builtin_dim) {
            Some(3) => TablePreset::Para3d,
            _ => TablePreset::Para2d,
        });
        let mut c = ExperimentConfig::preset(preset, self.smoother.unwrap_or(SmootherKind::Gs));
        if let Some(v) = self.d {
            c.d = v;
        }
        if let Some(v) = &self.geometry {
            c.geometry = v.clone();
        }
        macro_rules! set {
            ($($field:ident),*) => {$(if let Some(v) = self.$field { c.$field = v; })*};
        }
        set!(p_min, p_max, level_min, level_max, bc, sigma, tau, tol, seed, cycle, nu, max_iter, memory_limit_mb);
        c.coarse_level = self.coarse_level.or(c.coarse_level);
        c.tau_mass = self.tau_mass.or(c.tau_mass);
        c
    }
}

fn writer(out: Option<&PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> biharmonic_mg::Result<ExitCode> {
    match cli.command {
        Command::Table { table, opts, format, out } => {
            let config = opts.config(table);
            let result = run_table(&config)?;
            let mut w = writer(out.as_ref())?;
            w.write_all(result.render(format).as_bytes())?;
            w.flush()?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { tighten, quick, seed, out } => {
            let mut sweep = if quick { VerifySweep::quick() } else { VerifySweep::default() };
            sweep.seed = seed;
            let mut w = writer(out.as_ref())?;
            let ok = run_verify(&sweep, tighten, &mut w)?;
            w.flush()?;
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Solve { opts, p, level, samples, out } => {
            let mut config = opts.config(None);
            if let Some(p) = p {
                config.p_min = p;
                config.p_max = p;
            }
            if let Some(l) = level {
                config.level_max = l;
            }
            config.p_max = config.p_max.max(config.p_min);
            config.level_min = config.level_max;
            let report = solve_once(&config, samples)?;
            std::fs::create_dir_all(&out)?;
            report.write_coefficients_csv(&mut BufWriter::new(File::create(out.join("coefficients.csv"))?))?;
            report.write_samples_csv(&mut BufWriter::new(File::create(out.join("samples.csv"))?))?;
            eprintln!(
                "p = {}, level = {}, dofs = {}, iterations = {}, converged = {}",
                report.p, report.level, report.dofs, report.iterations, report.converged
            );
            Ok(if report.converged { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
