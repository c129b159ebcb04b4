mod common;

use tangent_plane_llg::diagnostics::{dense_oracle_solve, random_unit};
use tangent_plane_llg::field::{MagnetizationField, NodalField3};
use tangent_plane_llg::physics::{AppliedField, PiKind};
use tangent_plane_llg::precond::PrecondKind;
use tangent_plane_llg::scheme::{
    lambda_field, lh_term, normalize_update, run_simulation, tps_step, unprojected_update, wk_eval, SchemeCoefficients, SolveSettings,
    Stepper, TimeStepState,
};
use tangent_plane_llg::tangent::{FrameStrategy, TnChoice};
use tangent_plane_llg::vec3::{self, E1, E2};
use tangent_plane_llg::Error;

const ZERO_FIELD: AppliedField = AppliedField::Constant { value: [0.0; 3] };

fn academic_field() -> AppliedField {
    AppliedField::Academic { amplitude: 10.0 }
}

fn tight() -> SolveSettings {
    let mut s = SolveSettings::default();
    s.gmres.tol = 1e-13;
    s
}

#[test]
fn wk_examples() {
    let k: f64 = 0.01;
    let c1 = SchemeCoefficients::tps1(0.3, 1.0).unwrap();
    let c2 = SchemeCoefficients::tps2(0.3, 1.0).unwrap();
    assert_eq!(wk_eval(&c1, k, 0.0).unwrap(), 0.3);
    assert_eq!(wk_eval(&c2, k, 0.0).unwrap(), 0.3);
    assert_eq!(wk_eval(&c1, k, 1e6).unwrap(), 0.3);
    let cap = SchemeCoefficients::cap(k);
    for s in [cap, 2.0 * cap, 1e12] {
        assert!((wk_eval(&c2, k, s).unwrap() - (0.3 + 1.0 / (2.0 * k.ln().abs()))).abs() < 1e-14);
    }
    let low = 0.3 / (1.0 + 1.0 / (2.0 * 0.3 * k.ln().abs()));
    assert!((wk_eval(&c2, k, -1e12).unwrap() - low).abs() < 1e-14);
    assert!(wk_eval(&c2, 1.0, 0.0).is_err());
    assert!(wk_eval(&c2, 2.0, 0.0).is_err());
    // the first-order scheme has no restriction on k
    assert!(wk_eval(&c1, 2.0, 0.0).is_ok());
}

/// `W_k(s) ≥ α/2` on a grid of `(α, k, s)` with `α |ln k| ≥ 1/2`, which is
/// where the capped lower branch stays above `α/2`.
#[test]
fn wk_lower_bound_on_grid() {
    let ss: Vec<f64> = (-40..=40).map(|i| (i as f64).signum() * 10f64.powf(i as f64 / 4.0)).collect();
    for alpha in [0.1, 0.25, 0.5, 1.0] {
        for k in [1e-1f64, 3e-2, 1e-2, 1e-3, 1e-4, 1e-6] {
            if alpha * k.ln().abs() < 0.5 {
                continue;
            }
            let c = SchemeCoefficients::tps2(alpha, 1.0).unwrap();
            for &s in &ss {
                let w = c.wk(k, s).unwrap();
                assert!(w >= alpha / 2.0 && w.is_finite(), "alpha={alpha} k={k} s={s} w={w}");
            }
        }
    }
}

/// For small damping the lower branch of the formula dips below `α/2`.
#[test]
fn wk_lower_bound_fails_for_small_alpha() {
    let (alpha, k) = (0.02, 0.017688);
    let c = SchemeCoefficients::tps2(alpha, 1.0).unwrap();
    let w = c.wk(k, -1e12).unwrap();
    assert!(w > 0.0);
    assert!(w < alpha / 2.0, "{w}");
}

#[test]
fn wk_is_monotone_in_s() {
    let c = SchemeCoefficients::tps2(0.4, 2.0).unwrap();
    let mut prev = 0.0;
    for i in -200..=200 {
        let w = c.wk(0.05, i as f64 * 0.5).unwrap();
        assert!(w >= prev);
        prev = w;
    }
}

#[test]
fn lambda_examples() {
    let space = common::cube(2);
    let n = space.num_nodes();
    let ne = space.mesh().num_elements();
    let m = vec![vec3::normalize([1.0, 2.0, -0.5]); n];
    let l = lambda_field(&space, &m, &NodalField3::zeros(n), 10.0);
    assert_eq!(l.len(), ne);
    assert!(l.iter().all(|&v| v.abs() < 1e-15));

    let f = NodalField3(m.iter().map(|&v| vec3::scale(2.5, v)).collect());
    let l = lambda_field(&space, &m, &f, 10.0);
    assert!(l.iter().all(|&v| (v - 2.5).abs() < 1e-14));

    // m = (x₁, 0, 0) has |∇m|² = 1 everywhere
    let lin: Vec<[f64; 3]> = space.mesh().nodes().iter().map(|x| [x[0], 0.0, 0.0]).collect();
    let l = lambda_field(&space, &lin, &NodalField3::zeros(n), 10.0);
    assert!(l.iter().all(|&v| (v + 10.0).abs() < 1e-13), "{l:?}");
}

#[test]
fn lh_examples() {
    let space = common::cube(1);
    let n = space.num_nodes();
    let c = [0.5, -1.0, 2.0];
    let f = AppliedField::Constant { value: c };
    let m = common::random_field(n, 1);
    let m_prev = common::random_field(n, 2);
    for coeffs in [SchemeCoefficients::tps1(0.5, 1.0).unwrap(), SchemeCoefficients::tps2(0.5, 1.0).unwrap()] {
        let lh = lh_term(&coeffs, &space, &PiKind::Zero, &f, m.values(), m_prev.values(), 0.3, 0.01);
        assert!(lh.values().iter().all(|&v| v == c));
    }

    let pi = PiKind::Uniaxial { axis: [0.0, 0.0, 1.0], strength: 1.5 };
    let ramp = AppliedField::Ramp { value: c };
    let tps2 = SchemeCoefficients::tps2(0.5, 1.0).unwrap();
    let lh = lh_term(&tps2, &space, &pi, &ramp, m.values(), m.values(), 1.0, 0.1);
    for (v, mi) in lh.values().iter().zip(m.values()) {
        let expect = vec3::add(vec3::scale(1.05, c), [0.0, 0.0, 1.5 * mi[2]]);
        assert!(common::max_abs_diff(v, &expect) < 1e-14);
    }

    let tps1 = SchemeCoefficients::tps1(0.5, 1.0).unwrap();
    let lh = lh_term(&tps1, &space, &pi, &ramp, m.values(), m_prev.values(), 2.0, 0.1);
    for (v, mi) in lh.values().iter().zip(m.values()) {
        let expect = vec3::add(vec3::scale(2.0, c), [0.0, 0.0, 1.5 * mi[2]]);
        assert!(common::max_abs_diff(v, &expect) < 1e-14);
    }
}

#[test]
fn tps1_weighted_mass_is_plain_mass() {
    let space = common::cube(2);
    let m = common::random_field(space.num_nodes(), 3);
    let coeffs = SchemeCoefficients::tps1(0.5, 10.0).unwrap();
    let stepper = Stepper::new(space.clone(), coeffs, 0.01, PiKind::Zero, academic_field(), tight()).unwrap();
    let sys = stepper.assemble(&TimeStepState::initial(m)).unwrap();
    assert_eq!(sys.weighted_mass.to_csr3().to_dense(), space.mass().matrix.kron_identity(3).to_dense());
}

#[test]
fn equilibrium_step_is_stationary() {
    let space = common::cube(2);
    let n = space.num_nodes();
    for coeffs in [SchemeCoefficients::tps1(0.5, 10.0).unwrap(), SchemeCoefficients::tps2(0.5, 10.0).unwrap()] {
        let m0 = MagnetizationField::uniform(n, vec3::normalize([0.3, -0.4, 0.8])).unwrap();
        let (next, rep) =
            tps_step(space.clone(), &TimeStepState::initial(m0.clone()), coeffs, 0.01, PiKind::Zero, ZERO_FIELD, tight()).unwrap();
        // b = −ℓ²Lm vanishes up to the rounding of the stiffness row sums
        assert!(rep.v.max_norm() < 1e-12, "{}", rep.v.max_norm());
        assert!(common::max_abs_diff(&next.m.to_flat(), &m0.to_flat()) < 1e-14);
    }
}

#[test]
fn one_step_matches_dense_oracle() {
    let space = common::cube(2);
    assert_eq!(space.num_nodes(), 27);
    let m0 = common::random_field(27, 4);
    for (coeffs, precond) in [
        (SchemeCoefficients::tps1(0.5, 10.0).unwrap(), PrecondKind::Practical),
        (SchemeCoefficients::tps2(0.5, 10.0).unwrap(), PrecondKind::Theoretical),
        (SchemeCoefficients::tps1(0.1, 1.0).unwrap(), PrecondKind::Jacobi),
    ] {
        let settings = SolveSettings { precond, ..tight() };
        let mut stepper = Stepper::new(space.clone(), coeffs, 0.01, PiKind::Zero, academic_field(), settings).unwrap();
        let state = TimeStepState::initial(m0.clone());
        let (_, frame) = stepper.frame_for(&state.m).unwrap();
        let sys = stepper.assemble(&state).unwrap();
        let oracle = dense_oracle_solve(&sys, &frame).unwrap();
        let (next, rep) = stepper.step(&state).unwrap();
        assert!(common::max_abs_diff(&rep.v.to_flat(), &oracle.v) < 1e-9 * (1.0 + rep.v.max_norm()));
        let expect = normalize_update(&m0, &NodalField3::from_flat(&oracle.v), 0.01).unwrap();
        assert!(common::max_abs_diff(&next.m.to_flat(), &expect.to_flat()) < 1e-9);
        // Qᵀ(A Q x − b) tested against every tangent basis vector
        let res = &oracle.dense.reduced * nalgebra::DVector::from_column_slice(&rep.x) - &oracle.dense.b;
        assert!(res.amax() <= 1e-9 * oracle.dense.b.amax());
        assert!(rep.unit_deviation <= 1e-14);
        assert!(rep.tangency <= 1e-9 * (1.0 + rep.v.max_norm()));
    }
}

#[test]
fn frame_strategy_does_not_change_the_update() {
    let space = common::cube(2);
    let m0 = common::random_field(space.num_nodes(), 5);
    let coeffs = SchemeCoefficients::tps1(0.5, 10.0).unwrap();
    let mut vs = Vec::new();
    for frame in FrameStrategy::ALL {
        for tn in [TnChoice::Adaptive, TnChoice::parse("t2-").unwrap()] {
            let settings = SolveSettings { frame, tn, ..tight() };
            let (_, rep) = tps_step(space.clone(), &TimeStepState::initial(m0.clone()), coeffs, 0.01, PiKind::Zero, academic_field(), settings)
                .unwrap();
            vs.push(rep.v.to_flat());
        }
    }
    for v in &vs[1..] {
        assert!(common::max_abs_diff(v, &vs[0]) < 1e-9);
    }
}

#[test]
fn normalize_examples() {
    let m = MagnetizationField::new(vec![E1, E2]).unwrap();
    assert_eq!(normalize_update(&m, &NodalField3::zeros(2), 0.3).unwrap().values(), m.values());
    let out = normalize_update(&MagnetizationField::new(vec![E1]).unwrap(), &NodalField3(vec![E2]), 1.0).unwrap();
    let s = 0.5f64.sqrt();
    assert!(common::max_abs_diff(&out.values()[0], &[s, s, 0.0]) < 1e-15);
    assert!(matches!(normalize_update(&m, &NodalField3(vec![E2, E2]), 1.0), Err(Error::TangencyViolation { node: 1, .. })));
    assert!(matches!(normalize_update(&m, &NodalField3::zeros(3), 1.0), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn pythagoras_for_random_tangent_updates() {
    let mut rng = common::rng(6);
    for _ in 0..500 {
        let m = random_unit(&mut rng);
        let w = random_unit(&mut rng);
        let v = vec3::cross(m, w);
        let k = 0.37;
        let u = vec3::axpy(m, k, v);
        assert!((vec3::dot(u, u) - (1.0 + k * k * vec3::dot(v, v))).abs() < 1e-12);
        let out = normalize_update(&MagnetizationField::new(vec![m]).unwrap(), &NodalField3(vec![v]), k).unwrap();
        assert!((vec3::norm(out.values()[0]) - 1.0).abs() < 1e-15);
    }
}

#[test]
fn unprojected_update_grows_the_norm() {
    let m = MagnetizationField::new(vec![E1]).unwrap();
    let out = unprojected_update(&m, &NodalField3(vec![[0.0, 2.0, 0.0]]), 0.5).unwrap();
    assert_eq!(out.values()[0], [1.0, 1.0, 0.0]);
}

#[test]
fn single_step_run_equals_tps_step() {
    let space = common::cube(2);
    let m0 = common::random_field(space.num_nodes(), 7);
    let coeffs = SchemeCoefficients::tps2(0.5, 10.0).unwrap();
    let (one, _) = tps_step(space.clone(), &TimeStepState::initial(m0.clone()), coeffs, 0.01, PiKind::Zero, academic_field(), tight()).unwrap();
    let mut stepper = Stepper::new(space, coeffs, 0.01, PiKind::Zero, academic_field(), tight()).unwrap();
    let (run, summary) = run_simulation(&mut stepper, m0, 1, &mut |_, _| Ok(())).unwrap();
    assert_eq!(one.m.values(), run.m.values());
    assert_eq!(summary.steps, 1);
    assert_eq!(run.n, 1);
    assert!((run.t - 0.01).abs() < 1e-15);
}

#[test]
fn equilibrium_run_stays_constant() {
    let space = common::cube(2);
    let m0 = MagnetizationField::uniform(space.num_nodes(), E2).unwrap();
    let mut stepper = Stepper::new(space, SchemeCoefficients::tps1(0.5, 10.0).unwrap(), 0.01, PiKind::Zero, ZERO_FIELD, tight()).unwrap();
    let (end, summary) = run_simulation(&mut stepper, m0.clone(), 5, &mut |_, _| Ok(())).unwrap();
    assert!(common::max_abs_diff(&end.m.to_flat(), &m0.to_flat()) < 1e-13);
    assert_eq!(summary.steps, 5);
}

#[test]
fn projection_free_norms_are_non_decreasing() {
    let space = common::cube(2);
    let m0 = common::random_field(space.num_nodes(), 8);
    let settings = SolveSettings { projection: false, ..tight() };
    let mut stepper = Stepper::new(space, SchemeCoefficients::tps1(0.5, 10.0).unwrap(), 0.01, PiKind::Zero, academic_field(), settings).unwrap();
    let mut prev: Vec<f64> = m0.values().iter().map(|&v| vec3::norm(v)).collect();
    run_simulation(&mut stepper, m0, 5, &mut |state, _| {
        let norms: Vec<f64> = state.m.values().iter().map(|&v| vec3::norm(v)).collect();
        for (a, b) in norms.iter().zip(&prev) {
            assert!(*a >= 1.0 - 1e-14 && *a >= b - 1e-14);
        }
        prev = norms;
        Ok(())
    })
    .unwrap();
}

#[test]
fn exchange_energy_decays_without_forcing() {
    let space = common::cube(3);
    let m0 = common::random_field(space.num_nodes(), 9);
    let mut stepper = Stepper::new(space.clone(), SchemeCoefficients::tps1(0.5, 1.0).unwrap(), 1e-3, PiKind::Zero, ZERO_FIELD, tight()).unwrap();
    let mut prev = space.exchange_energy(1.0, m0.values());
    run_simulation(&mut stepper, m0, 10, &mut |_, rep| {
        assert!(rep.exchange_energy <= prev * (1.0 + 1e-12), "{} > {prev}", rep.exchange_energy);
        prev = rep.exchange_energy;
        Ok(())
    })
    .unwrap();
}

#[test]
fn observer_error_aborts_with_partial_output() {
    let space = common::cube(1);
    let m0 = common::random_field(space.num_nodes(), 10);
    let mut stepper = Stepper::new(space, SchemeCoefficients::tps1(0.5, 1.0).unwrap(), 0.01, PiKind::Zero, academic_field(), tight()).unwrap();
    let mut seen = 0;
    let err = run_simulation(&mut stepper, m0, 5, &mut |_, rep| {
        seen += 1;
        if rep.step == 3 {
            Err(Error::Config("stop".into()))
        } else {
            Ok(())
        }
    })
    .unwrap_err();
    assert_eq!(seen, 3);
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn non_convergence_carries_the_step_index() {
    let space = common::cube(2);
    let m0 = common::random_field(space.num_nodes(), 11);
    let mut settings = SolveSettings { precond: PrecondKind::None, ..tight() };
    settings.gmres.maxit = 2;
    settings.gmres.restart = 2;
    let mut stepper = Stepper::new(space, SchemeCoefficients::tps1(0.5, 10.0).unwrap(), 0.01, PiKind::Zero, academic_field(), settings).unwrap();
    let err = stepper.step(&TimeStepState::initial(m0)).unwrap_err();
    match err {
        Error::Step { step, source } => {
            assert_eq!(step, 1);
            assert!(matches!(*source, Error::NotConverged { .. }));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn invalid_coefficients_are_rejected() {
    assert!(SchemeCoefficients::tps1(0.0, 1.0).is_err());
    assert!(SchemeCoefficients::tps1(1.5, 1.0).is_err());
    assert!(SchemeCoefficients::tps1(0.5, -1.0).is_err());
    let space = common::cube(1);
    let c = SchemeCoefficients::tps2(0.5, 1.0).unwrap();
    assert!(Stepper::new(space.clone(), c, 1.0, PiKind::Zero, ZERO_FIELD, SolveSettings::default()).is_err());
    let bad = SolveSettings { rebuild_every: 0, ..Default::default() };
    assert!(Stepper::new(space, c, 0.1, PiKind::Zero, ZERO_FIELD, bad).is_err());
}

#[test]
fn tps2_stabilization_beta() {
    let k: f64 = 0.01;
    let c = SchemeCoefficients::tps2(0.5, 10.0).unwrap();
    assert!((c.beta(k) - 5.0 * (1.0 + (k * k.ln()).abs())).abs() < 1e-14);
    assert_eq!(SchemeCoefficients::tps1(0.5, 10.0).unwrap().beta(k), 10.0);
}
