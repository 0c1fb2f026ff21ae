//! PCG with one V(1,1) cycle as preconditioner, for each smoother, on a
//! built-in domain.
//!
//! ```bash
//! cargo run --release --example multigrid_solve -- unit-square 4 6
//! ```

use std::time::Instant;

use biharmonic_mg::assembly::{assemble_rhs, model_load};
use biharmonic_mg::geometry::builtin_domain;
use biharmonic_mg::multigrid::{solve, CycleSpec, HierarchyConfig, MultigridHierarchy};
use biharmonic_mg::smoothers::SmootherKind;

fn main() -> biharmonic_mg::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.first().map_or("unit-square", String::as_str);
    let p: usize = args.get(1).map_or(4, |s| s.parse().expect("degree"));
    let level: u32 = args.get(2).map_or(6, |s| s.parse().expect("level"));
    let g = builtin_domain(name)?;

    for kind in SmootherKind::ALL {
        let start = Instant::now();
        let h = MultigridHierarchy::build(&HierarchyConfig::new(g.dim(), p, level, kind), &g)?;
        let a = h.physical_operator(level, &g)?;
        let rhs = assemble_rhs(&h.level(level)?.space, &g, &model_load(g.dim()))?;
        let out = solve(&h, &CycleSpec::default(), level, &a, &rhs, 0, 1e-8, 2000)?;
        println!(
            "{kind:>6}: {} iterations, converged {}, {:.2}s, coarsest level {}",
            out.iterations,
            out.converged,
            start.elapsed().as_secs_f64(),
            h.level_min()
        );
    }
    Ok(())
}
