//! A small iteration-count table in markdown. Pass a preset name (para2d,
//! para3d, geo2d, geo3d) and a smoother; degrees and levels are trimmed so
//! the run takes seconds.
//!
//! ```bash
//! cargo run --release --example iteration_table -- geo2d hybrid
//! ```

use biharmonic_mg::experiments::{run_table, ExperimentConfig, TablePreset};
use biharmonic_mg::smoothers::SmootherKind;

fn main() -> biharmonic_mg::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let table: TablePreset = args.first().map_or("para2d", String::as_str).parse()?;
    let smoother: SmootherKind = args.get(1).map_or("gs", String::as_str).parse()?;
    let mut config = ExperimentConfig::preset(table, smoother);
    config.p_max = config.p_min + 2;
    config.level_max = config.level_min + 1;
    let result = run_table(&config)?;
    print!("{}", result.to_markdown());
    Ok(())
}
