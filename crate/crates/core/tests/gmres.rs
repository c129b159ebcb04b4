mod common;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use tangent_plane_llg::diagnostics::random_vector;
use tangent_plane_llg::gmres::{gmres_solve, FnOperator, GmresConfig, IdentityOperator};
use tangent_plane_llg::Error;

fn dense_op(a: &DMatrix<f64>) -> FnOperator<impl Fn(&[f64], &mut [f64]) + '_> {
    FnOperator {
        dim: a.nrows(),
        f: move |x: &[f64], y: &mut [f64]| {
            let r = a * DVector::from_column_slice(x);
            y.copy_from_slice(r.as_slice());
        },
    }
}

/// Diagonally dominated nonsymmetric test matrix.
fn random_matrix(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = common::rng(seed);
    DMatrix::from_fn(n, n, |i, j| rng.gen_range(-1.0..1.0) / (n as f64).sqrt() + if i == j { 2.0 } else { 0.0 })
}

#[test]
fn identity_converges_in_one_iteration() {
    let b = random_vector(&mut common::rng(1), 30);
    let (x, s) = gmres_solve(&IdentityOperator(30), &IdentityOperator(30), &b, &[0.0; 30], &GmresConfig::default()).unwrap();
    assert_eq!(s.iterations, 1);
    assert!(s.converged);
    assert!(common::max_abs_diff(&x, &b) < 1e-15);
}

#[test]
fn exact_inverse_preconditioner_needs_one_iteration() {
    let a = random_matrix(25, 2);
    let inv = a.clone().try_inverse().unwrap();
    let b = random_vector(&mut common::rng(3), 25);
    let cfg = GmresConfig { tol: 1e-12, ..Default::default() };
    let (x, s) = gmres_solve(&dense_op(&a), &dense_op(&inv), &b, &[0.0; 25], &cfg).unwrap();
    assert_eq!(s.iterations, 1);
    let expect = &inv * DVector::from_column_slice(&b);
    assert!(common::max_abs_diff(&x, expect.as_slice()) < 1e-11);
}

#[test]
fn random_system_matches_lu() {
    let n = 40;
    let a = random_matrix(n, 4);
    let b = random_vector(&mut common::rng(5), n);
    let cfg = GmresConfig { tol: 1e-13, ..Default::default() };
    let (x, s) = gmres_solve(&dense_op(&a), &IdentityOperator(n), &b, &vec![0.0; n], &cfg).unwrap();
    assert!(s.converged && s.final_relative_residual <= 1e-13 * cfg.floor_factor);
    let lu = a.clone().lu().solve(&DVector::from_column_slice(&b)).unwrap();
    assert!(common::max_abs_diff(&x, lu.as_slice()) / lu.amax() < 1e-11);
    assert!(s.iterations <= n + 1);
}

#[test]
fn apply_counts_and_history() {
    let n = 30;
    let a = random_matrix(n, 6);
    let b = random_vector(&mut common::rng(7), n);
    let cfg = GmresConfig { tol: 1e-12, ..Default::default() };
    let (_, s) = gmres_solve(&dense_op(&a), &IdentityOperator(n), &b, &vec![0.0; n], &cfg).unwrap();
    assert_eq!(s.residual_history.len(), s.iterations);
    assert_eq!(s.cycle_starts, vec![0]);
    assert_eq!(s.restarts, 0);
    // one application per Arnoldi step plus the explicit residual checks
    assert_eq!(s.operator_applies, s.iterations + s.residual_evaluations);
    assert!(s.precond_applies >= s.operator_applies);
    let mut prev = s.initial_residual;
    for &r in &s.residual_history {
        assert!(r <= prev * (1.0 + 1e-12), "{r} > {prev}");
        prev = r;
    }
}

#[test]
fn restarts_are_recorded_and_still_converge() {
    let n = 60;
    let a = random_matrix(n, 8);
    let b = random_vector(&mut common::rng(9), n);
    let cfg = GmresConfig { tol: 1e-10, restart: 5, ..Default::default() };
    let (x, s) = gmres_solve(&dense_op(&a), &IdentityOperator(n), &b, &vec![0.0; n], &cfg).unwrap();
    assert!(s.converged);
    assert!(s.restarts >= 1);
    assert_eq!(s.cycle_starts.len(), s.restarts + 1);
    for w in s.cycle_starts.windows(2) {
        assert!(w[1] - w[0] <= 5);
        // monotone within each cycle
        for i in w[0] + 1..w[1] {
            assert!(s.residual_history[i] <= s.residual_history[i - 1] * (1.0 + 1e-12));
        }
    }
    let lu = a.lu().solve(&DVector::from_column_slice(&b)).unwrap();
    assert!(common::max_abs_diff(&x, lu.as_slice()) / lu.amax() < 1e-8);
}

#[test]
fn reorthogonalization_gives_same_solution() {
    let n = 35;
    let a = random_matrix(n, 10);
    let b = random_vector(&mut common::rng(11), n);
    let base = GmresConfig { tol: 1e-12, ..Default::default() };
    let (x1, _) = gmres_solve(&dense_op(&a), &IdentityOperator(n), &b, &vec![0.0; n], &base).unwrap();
    let cfg = GmresConfig { reorthogonalize: true, ..base };
    let (x2, _) = gmres_solve(&dense_op(&a), &IdentityOperator(n), &b, &vec![0.0; n], &cfg).unwrap();
    assert!(common::max_abs_diff(&x1, &x2) < 1e-10);
}

#[test]
fn exact_initial_guess_takes_no_iterations() {
    let n = 20;
    let a = random_matrix(n, 12);
    let xs = random_vector(&mut common::rng(13), n);
    let b = (&a * DVector::from_column_slice(&xs)).as_slice().to_vec();
    let (x, s) = gmres_solve(&dense_op(&a), &IdentityOperator(n), &b, &xs, &GmresConfig { tol: 1e-10, ..Default::default() }).unwrap();
    assert_eq!(s.iterations, 0);
    assert!(s.converged);
    assert_eq!(x, xs);
}

#[test]
fn zero_rhs_gives_zero() {
    let (x, s) = gmres_solve(&IdentityOperator(4), &IdentityOperator(4), &[0.0; 4], &[0.0; 4], &GmresConfig::default()).unwrap();
    assert_eq!(x, vec![0.0; 4]);
    assert!(s.converged && s.iterations == 0);
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let n = 50;
    let a = random_matrix(n, 14);
    let b = random_vector(&mut common::rng(15), n);
    let cfg = GmresConfig { tol: 1e-14, restart: 3, maxit: 6, ..Default::default() };
    let (_, s) = gmres_solve(&dense_op(&a), &IdentityOperator(n), &b, &vec![0.0; n], &cfg).unwrap();
    assert!(!s.converged);
    assert!(s.iterations <= 6);
}

#[test]
fn bad_input_is_rejected() {
    let id = IdentityOperator(3);
    assert!(matches!(gmres_solve(&id, &id, &[1.0; 2], &[0.0; 3], &GmresConfig::default()), Err(Error::DimensionMismatch { .. })));
    assert!(gmres_solve(&id, &id, &[1.0; 3], &[0.0; 3], &GmresConfig { tol: 0.0, ..Default::default() }).is_err());
    assert!(gmres_solve(&id, &id, &[1.0; 3], &[0.0; 3], &GmresConfig { restart: 0, ..Default::default() }).is_err());
    assert!(matches!(gmres_solve(&id, &id, &[f64::NAN; 3], &[0.0; 3], &GmresConfig::default()), Err(Error::NonFinite { .. })));
}
