//! Runs the dense verification sweep and prints a summary per statement.
//! Pass `--full` for the complete sweep; the default is the quick one.
//!
//! ```bash
//! cargo run --release --example verification_suite -- --full
//! ```

use std::collections::BTreeMap;

use biharmonic_mg::verify::VerifySweep;

fn main() -> biharmonic_mg::Result<()> {
    let full = std::env::args().any(|a| a == "--full");
    let sweep = if full { VerifySweep::default() } else { VerifySweep::quick() };
    let reports = sweep.run(1.0)?;
    let mut summary: BTreeMap<&str, (usize, usize, f64, f64)> = BTreeMap::new();
    for r in &reports {
        let e = summary.entry(r.statement.as_str()).or_insert((0, 0, f64::INFINITY, f64::NEG_INFINITY));
        e.0 += 1;
        e.1 += usize::from(r.pass);
        e.2 = e.2.min(r.measured);
        e.3 = e.3.max(r.measured);
    }
    for (name, (n, ok, lo, hi)) in summary {
        println!("{name:<28} {ok:>3}/{n:<3} measured in [{lo:.4e}, {hi:.4e}]");
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    println!("{} reports, {failed} failed", reports.len());
    Ok(())
}
