//! Energy-norm contraction of the two-grid method with the mass smoother as
//! the number of smoothing steps doubles.
//!
//! ```bash
//! cargo run --release --example two_grid_contraction -- 4 4
//! ```

use biharmonic_mg::verify::two_grid_contractions;

fn main() -> biharmonic_mg::Result<()> {
    let mut args = std::env::args().skip(1);
    let p: usize = args.next().map_or(4, |s| s.parse().expect("degree"));
    let level: u32 = args.next().map_or(4, |s| s.parse().expect("level"));
    let nus = [1, 2, 4, 8, 16, 32];
    let qs = two_grid_contractions(2, p, level, &nus)?;
    let mut prev: Option<f64> = None;
    for (nu, q) in nus.iter().zip(&qs) {
        match prev {
            Some(pq) => println!("ν = {nu:>2}: q = {q:.4}, q(ν)/q(ν/2) = {:.3}", q / pq),
            None => println!("ν = {nu:>2}: q = {q:.4}"),
        }
        prev = Some(*q);
    }
    Ok(())
}
