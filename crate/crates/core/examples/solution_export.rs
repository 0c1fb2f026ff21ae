//! Solves the model problem once and writes the coefficients and a sampled
//! grid of solution values as CSV.
//!
//! ```bash
//! cargo run --release --example solution_export -- /tmp/solution
//! ```

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use biharmonic_mg::experiments::{solve_once, ExperimentConfig, TablePreset};
use biharmonic_mg::smoothers::SmootherKind;

fn main() -> biharmonic_mg::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "solution".into()));
    let mut config = ExperimentConfig::preset(TablePreset::Geo2d, SmootherKind::Hybrid);
    config.p_min = 3;
    config.level_max = 5;
    config.level_min = 5;
    let report = solve_once(&config, 41)?;
    std::fs::create_dir_all(&dir)?;
    report.write_coefficients_csv(&mut BufWriter::new(File::create(dir.join("coefficients.csv"))?))?;
    report.write_samples_csv(&mut BufWriter::new(File::create(dir.join("samples.csv"))?))?;
    let peak = report.samples.iter().map(|s| s.2).fold(f64::NEG_INFINITY, f64::max);
    println!("{} iterations; max sampled value {peak:.6e}; files in {}", report.iterations, dir.display());
    Ok(())
}
