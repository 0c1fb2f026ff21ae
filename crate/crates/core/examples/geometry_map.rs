//! Evaluates the built-in quarter annulus and writes it as a geometry file.
//!
//! ```bash
//! cargo run --release --example geometry_map -- /tmp/annulus.json
//! ```

use biharmonic_mg::geometry::{builtin_domain, GeometryMap};

fn main() -> biharmonic_mg::Result<()> {
    let g = builtin_domain("quarter-annulus-2d")?;
    println!("degrees {:?}, {} control points", g.degrees(), g.control_points().len());
    for s in [[0.0, 0.0], [0.5, 0.0], [0.5, 1.0], [1.0, 0.5]] {
        let e = g.eval(&s)?;
        let r = (e.point[0].powi(2) + e.point[1].powi(2)).sqrt();
        println!("G({s:?}) = ({:.6}, {:.6}), radius {r:.6}, det J = {:.6}", e.point[0], e.point[1], e.det);
    }

    if let Some(path) = std::env::args().nth(1) {
        g.save(&path)?;
        let back = GeometryMap::load(&path)?;
        println!("wrote {path}; reloaded map agrees: {}", back.eval(&[0.3, 0.7])?.point == g.eval(&[0.3, 0.7])?.point);
    }
    Ok(())
}
