//! Assembles the physical stiffness, the reduced Kronecker operator and the
//! load vector, then compares the two energies on a random vector.
//!
//! ```bash
//! cargo run --release --example assemble_system -- quarter-annulus-2d 4 4
//! ```

use biharmonic_mg::assembly::{model_load, BoundaryCondition, ConstrainedSpace, DiscreteSystem};
use biharmonic_mg::geometry::builtin_domain;
use biharmonic_mg::multigrid::random_initial_guess;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn main() -> biharmonic_mg::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.first().map_or("unit-square", String::as_str);
    let p: usize = args.get(1).map_or(3, |s| s.parse().expect("degree"));
    let level: u32 = args.get(2).map_or(4, |s| s.parse().expect("level"));

    let g = builtin_domain(name)?;
    let space = ConstrainedSpace::uniform(g.dim(), p, level, BoundaryCondition::FirstBiharmonic)?;
    let sys = DiscreteSystem::assemble(space, &g, &model_load(g.dim()))?;
    let n = sys.space.ndofs();
    println!("{name}: p = {p}, level {level}, {n} dofs, {} nonzeros", sys.stiffness.nnz());
    println!("stiffness symmetric: {}", sys.stiffness.is_symmetric());

    let u = random_initial_guess(n, 1);
    let physical = dot(&u, &sys.stiffness.matvec(&u));
    let reduced = dot(&u, &sys.reduced.apply(&u)?);
    println!("<B u, u> / <B̄ u, u> = {:.4}", physical / reduced);
    println!("sum of load vector = {:.6}", sys.rhs.iter().sum::<f64>());
    Ok(())
}
