//! The interior/boundary splitting of a clamped univariate spline space and
//! the subspace-corrected mass smoother built on it.
//!
//! ```bash
//! cargo run --release --example subspace_splitting -- 5 4
//! ```

use biharmonic_mg::assembly::{assemble_univariate, clamp_constraints, BoundaryCondition, ConstrainedSpace};
use biharmonic_mg::smoothers::{build_splitting, SigmaRule, SmootherKind, SubspaceMassSmoother};
use biharmonic_mg::spline::SplineSpace;

fn main() -> biharmonic_mg::Result<()> {
    let mut args = std::env::args().skip(1);
    let p: usize = args.next().map_or(5, |s| s.parse().expect("degree"));
    let level: u32 = args.next().map_or(4, |s| s.parse().expect("level"));

    let s = SplineSpace::new(p, level)?;
    let free = clamp_constraints(&s, BoundaryCondition::FirstBiharmonic)?;
    let split = build_splitting(&assemble_univariate(&s), free)?;
    println!("free {} = interior {} + boundary {}", split.n_free(), split.n0(), split.n1());
    let c = split.inverse_inequality_constant()? * split.h.powi(4);
    println!("h^4 λ_max(M₀⁻¹B₀) = {c:.3} (at most 144)");

    let space = ConstrainedSpace::uniform(2, p, level, BoundaryCondition::FirstBiharmonic)?;
    let sigma = SigmaRule::Paper.sigma(2, SmootherKind::Mass, s.h());
    let mass = SubspaceMassSmoother::for_space(&space, sigma, 1.0)?;
    for alpha in mass.subspaces() {
        let dim = mass.embedding_dense(&alpha).map_or(0, |e| e.ncols());
        println!("subspace {alpha:?}: {dim} functions");
    }
    let r = vec![1.0; mass.ndofs()];
    let z = mass.apply_inverse(&r);
    println!("<L⁻¹ 1, 1> = {:.6e}", z.iter().sum::<f64>());
    Ok(())
}
