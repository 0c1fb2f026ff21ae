//! V-cycle, W-cycle and two-grid preconditioners with several smoothing
//! counts on the unit square.
//!
//! ```bash
//! cargo run --release --example cycle_comparison -- 3 5
//! ```

use biharmonic_mg::assembly::{assemble_rhs, model_load};
use biharmonic_mg::geometry::GeometryMap;
use biharmonic_mg::multigrid::{solve, CycleSpec, CycleType, HierarchyConfig, MultigridHierarchy};
use biharmonic_mg::smoothers::SmootherKind;

fn main() -> biharmonic_mg::Result<()> {
    let mut args = std::env::args().skip(1);
    let p: usize = args.next().map_or(3, |s| s.parse().expect("degree"));
    let level: u32 = args.next().map_or(5, |s| s.parse().expect("level"));
    let g = GeometryMap::identity(2);

    for kind in [SmootherKind::Gs, SmootherKind::Mass] {
        let h = MultigridHierarchy::build(&HierarchyConfig::new(2, p, level, kind), &g)?;
        let a = h.physical_operator(level, &g)?;
        let rhs = assemble_rhs(&h.level(level)?.space, &g, &model_load(2))?;
        for cycle in [CycleType::V, CycleType::W, CycleType::TwoGrid] {
            let counts: Vec<String> = [1, 2]
                .into_iter()
                .map(|nu| {
                    let spec = CycleSpec::symmetric(cycle, nu)?;
                    let out = solve(&h, &spec, level, &a, &rhs, 0, 1e-8, 2000)?;
                    Ok(format!("ν={nu}: {}", out.iterations))
                })
                .collect::<biharmonic_mg::Result<_>>()?;
            println!("{kind:>4} {cycle:>8}  {}", counts.join("  "));
        }
    }
    Ok(())
}
