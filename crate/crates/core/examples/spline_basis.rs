//! Basis functions of an open-uniform spline space and the dyadic
//! refinement matrix.
//!
//! ```bash
//! cargo run --release --example spline_basis -- 3 2
//! ```

use biharmonic_mg::spline::SplineSpace;

fn main() -> biharmonic_mg::Result<()> {
    let mut args = std::env::args().skip(1);
    let p: usize = args.next().map_or(Ok(3), |s| s.parse()).expect("degree");
    let level: u32 = args.next().map_or(Ok(2), |s| s.parse()).expect("level");

    let space = SplineSpace::new(p, level)?;
    println!("degree {p}, {} elements, h = {}, dimension {}", space.elements(), space.h(), space.dim());
    println!("knots {:?}", space.knots());

    for x in [0.0, 0.3, 0.5, 1.0] {
        let b = space.eval_basis(x, 2)?;
        let sum: f64 = b.values[0].iter().sum();
        println!("x = {x}: functions {}..={}, values {:.4?}, sum {sum:.15}", b.first, b.first + p, b.values[0]);
    }

    let r = space.refinement_matrix()?;
    println!("refinement {} x {}, {} nonzeros", r.nrows(), r.ncols(), r.nnz());
    let row: Vec<String> = r.row(1).map(|(j, v)| format!("{j}:{v}")).collect();
    println!("row 1: {}", row.join(" "));
    Ok(())
}
