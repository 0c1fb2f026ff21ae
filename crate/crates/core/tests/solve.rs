//! End-to-end solves against dense factorizations.

use approx::assert_relative_eq;
use biharmonic_mg::assembly::{assemble_physical, assemble_rhs, model_load, BoundaryCondition, ConstrainedSpace};
use biharmonic_mg::experiments::{solve_once, solve_with_load, ExperimentConfig, TablePreset};
use biharmonic_mg::geometry::builtin_domain;
use biharmonic_mg::linalg::DenseCholesky;
use biharmonic_mg::smoothers::SmootherKind;

fn config(preset: TablePreset, smoother: SmootherKind, p: usize, level: u32) -> ExperimentConfig {
    let mut c = ExperimentConfig::preset(preset, smoother);
    (c.p_min, c.p_max) = (p, p);
    (c.level_min, c.level_max) = (level, level);
    c.tol = 1e-12;
    c
}

#[test]
fn multigrid_solution_matches_dense_solve() {
    for (preset, smoother) in [
        (TablePreset::Para2d, SmootherKind::Gs),
        (TablePreset::Para2d, SmootherKind::Mass),
        (TablePreset::Geo2d, SmootherKind::Hybrid),
    ] {
        let c = config(preset, smoother, 3, 3);
        let report = solve_once(&c, 5).unwrap();
        assert!(report.converged);

        let g = builtin_domain(&c.geometry).unwrap();
        let space = ConstrainedSpace::uniform(2, 3, 3, BoundaryCondition::FirstBiharmonic).unwrap();
        let a = assemble_physical(&space, &g).unwrap();
        let b = assemble_rhs(&space, &g, &model_load(2)).unwrap();
        let x = DenseCholesky::new(&a.to_dmatrix()).unwrap().solve(&b);
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (u, v) in report.coefficients.iter().zip(&x) {
            assert_relative_eq!(*u, *v, epsilon = 1e-9 * scale);
        }
        let (_, _, centre) = &report.samples[12];
        assert!(*centre > 0.0, "{preset} {smoother}: {centre}");
    }
}

#[test]
fn square_solution_is_close_to_the_exact_one() {
    // u = sin(πx) sin(πy) solves the model problem with simply supported
    // edges; the clamped solution is smaller but of the same sign and shape
    let report = solve_once(&config(TablePreset::Para2d, SmootherKind::Mass, 4, 4), 3).unwrap();
    let (_, x, centre) = &report.samples[4];
    assert_relative_eq!(x[0], 0.5);
    assert!(*centre > 0.1 && *centre < 1.0, "{centre}");
}

#[test]
fn zero_load_needs_no_iterations() {
    let report = solve_with_load(&config(TablePreset::Para2d, SmootherKind::Gs, 3, 4), 3, &|_| 0.0).unwrap();
    assert_eq!(report.iterations, 0);
    assert!(report.converged);
    assert!(report.coefficients.iter().all(|c| *c == 0.0));
}

#[test]
fn square_solution_is_symmetric_under_coordinate_swap() {
    let n = 9;
    let report = solve_once(&config(TablePreset::Para2d, SmootherKind::Mass, 3, 4), n).unwrap();
    for i in 0..n {
        for j in 0..n {
            let a = report.samples[i * n + j].2;
            let b = report.samples[j * n + i].2;
            assert!((a - b).abs() < 1e-8, "({i}, {j}): {a} vs {b}");
        }
    }
}

#[test]
fn cube_solve_converges() {
    let report = solve_once(&config(TablePreset::Para3d, SmootherKind::Mass, 3, 2), 3).unwrap();
    assert!(report.converged);
    assert!(report.samples[13].2 > 0.0);
}
