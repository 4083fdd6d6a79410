use ncfem::sparse::{backward_error, relative_residual, saddle_residual, solve_saddle, solve_spd, CsrMatrix, SymMatrixBuilder};
use ncfem::study::default_options;
use ncfem::*;

fn identity(n: usize) -> ncfem::sparse::SymCsr {
    let mut b = SymMatrixBuilder::new(n);
    for i in 0..n {
        b.add(i, i, 1.0);
    }
    b.finalize()
}

#[test]
fn hand_solvable_saddle_system() {
    let a = identity(2);
    let b = CsrMatrix::from_triplets(1, 2, vec![(0, 0, 1.0)]);
    let s = solve_saddle(&a, &b, &[0.0, 0.0], &[1.0], &SolverOptions::default()).unwrap();
    assert!((s.primal[0] - 1.0).abs() < 1e-14 && s.primal[1].abs() < 1e-14);
    assert!((s.multiplier[0] + 1.0).abs() < 1e-14);
    let r = saddle_residual(&a, &b, &s.primal, &s.multiplier, &[0.0, 0.0], &[1.0]);
    assert!((r - s.report.relative_residual).abs() < 1e-14);
}

#[test]
fn reported_residual_matches_recomputation() {
    let mesh = build_uniform_square_mesh(16).unwrap();
    let p = square_sine_problem();
    for method in [SpdMethod::ConjugateGradient, SpdMethod::Cholesky] {
        let opts = SolverOptions::default().with_method(method);
        let (u, report) = solve_cr(&mesh, &*p.load, RhsMode::Exact, &opts).unwrap();
        assert!(report.relative_residual <= 1e-12);
        assert_eq!(u.dofs.len(), mesh.num_edges());
    }
    let mut b = SymMatrixBuilder::new(3);
    for (i, j, v) in [(0, 0, 4.0), (1, 1, 3.0), (2, 2, 2.0), (0, 1, 1.0), (1, 0, 1.0)] {
        b.add(i, j, v);
    }
    let a = b.finalize();
    let rhs = [1.0, -2.0, 0.5];
    let (x, report) = solve_spd(&a, &rhs, &SolverOptions::default()).unwrap();
    assert!((relative_residual(&a, &x, &rhs) - report.relative_residual).abs() < 1e-14);
    assert!((backward_error(&a, &x, &rhs) - report.backward_error).abs() < 1e-14);
}

#[test]
fn zero_load_gives_zero_solution() {
    let mesh = build_uniform_parallelogram_mesh(4).unwrap();
    let (u, report) = solve_morley(&mesh, |_| 0.0, PlateRhsMode::Exact, &SolverOptions::default()).unwrap();
    assert!(u.vertex_values.iter().chain(&u.normal_derivatives).all(|&d| d == 0.0));
    assert_eq!(report.iterations, 0);
}

#[test]
fn ill_conditioned_plate_solve_is_rounding_limited_or_converged() {
    let plate = parallelogram_plate_problem();
    let mesh = build_uniform_parallelogram_mesh(64).unwrap();
    let (_, report) = solve_morley(&mesh, &*plate.load, PlateRhsMode::Exact, &default_options(&plate, 1e-12)).unwrap();
    assert!(report.relative_residual <= 1e-12 || report.rounding_limited);
    assert!(report.backward_error <= 32.0 * f64::EPSILON);
}

#[test]
fn unreachable_tolerance_is_an_error() {
    let mesh = build_uniform_square_mesh(8).unwrap();
    let p = square_sine_problem();
    let opts = SolverOptions { max_iterations: Some(2), ..SolverOptions::default() };
    let err = solve_cr(&mesh, &*p.load, RhsMode::Exact, &opts).unwrap_err();
    assert!(matches!(err, Error::NotConverged { .. }));
}
