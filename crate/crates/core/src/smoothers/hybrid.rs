use std::sync::Arc;

use super::{GaussSeidelSmoother, Smoother, SubspaceMassSmoother};
use crate::linalg::LinearOperator;

/// Forward Gauss-Seidel, one damped mass-smoother step on the physical
/// residual, backward Gauss-Seidel.
#[derive(Debug, Clone)]
pub struct HybridSmoother {
    gs: GaussSeidelSmoother,
    mass: Arc<SubspaceMassSmoother>,
}

impl HybridSmoother {
    /// `mass` carries the mass-step damping as its own `τ`.
    pub fn new(gs: GaussSeidelSmoother, mass: Arc<SubspaceMassSmoother>) -> Self {
        Self { gs, mass }
    }

    pub fn tau_mass(&self) -> f64 {
        self.mass.tau()
    }
}

impl Smoother for HybridSmoother {
    fn smooth(&self, u: &mut [f64], rhs: &[f64]) {
        self.gs.forward_sweep(u, rhs);
        let mut r = vec![0.0; u.len()];
        self.gs.matrix().residual_into(u, rhs, &mut r);
        let c = self.mass.apply_inverse(&r);
        for (ui, ci) in u.iter_mut().zip(&c) {
            *ui += ci;
        }
        self.gs.backward_sweep(u, rhs);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_physical, BoundaryCondition, ConstrainedSpace};
    use crate::geometry::builtin_domain;
    use rand::{Rng, SeedableRng};

    #[test]
    fn tiny_mass_damping_reduces_to_gauss_seidel() {
        let cs = ConstrainedSpace::uniform(2, 3, 3, BoundaryCondition::FirstBiharmonic).unwrap();
        let g = builtin_domain("quarter-annulus-2d").unwrap();
        let a = Arc::new(assemble_physical(&cs, &g).unwrap());
        let gs = GaussSeidelSmoother::new(a).unwrap();
        let h = cs.spaces()[0].h();
        let mass = SubspaceMassSmoother::for_space(&cs, 1.0 / (0.015 * h.powi(4)), 1e-300).unwrap();
        let hy = HybridSmoother::new(gs.clone(), Arc::new(mass));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let f: Vec<f64> = (0..cs.ndofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut u1: Vec<f64> = (0..cs.ndofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut u2 = u1.clone();
        gs.smooth(&mut u1, &f);
        hy.smooth(&mut u2, &f);
        assert_eq!(u1, u2);
    }
}
