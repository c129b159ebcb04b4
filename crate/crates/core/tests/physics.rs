mod common;

use tangent_plane_llg::physics::{
    applied_field_mumag4, field_from_millitesla, nondimensionalize, pi_apply, recovered_nodal_gradients, zhang_li_velocity, AppliedField,
    EffectiveFieldConfig, PiKind, SIParameters, MUMAG5_BETA, MUMAG5_U,
};
use tangent_plane_llg::vec3::{self, E3};

#[test]
fn permalloy_nondimensional_values() {
    let nd = nondimensionalize(&SIParameters::permalloy());
    assert!((nd.ell_ex2 - 32.3283).abs() <= 1e-3, "{}", nd.ell_ex2);
    assert!((nd.k - 0.017688).abs() <= 1e-5, "{}", nd.k);
    assert!((nd.h - 5.0).abs() < 1e-12);
}

#[test]
fn doubling_length_quarters_exchange() {
    let si = SIParameters::permalloy();
    let a = nondimensionalize(&si);
    let b = nondimensionalize(&SIParameters { length: 2.0 * si.length, ..si });
    assert!((b.ell_ex2 * 4.0 - a.ell_ex2).abs() <= 4.0 * f64::EPSILON * a.ell_ex2);
    assert_eq!(a.k, b.k);
}

#[test]
fn invalid_si_parameters() {
    assert!(SIParameters::permalloy().validate().is_ok());
    assert!(SIParameters { ms: 0.0, ..SIParameters::permalloy() }.validate().is_err());
    assert!(SIParameters { dt: f64::NAN, ..SIParameters::permalloy() }.validate().is_err());
}

#[test]
fn mumag4_field_within_a_tenth_of_a_percent() {
    let f = applied_field_mumag4();
    assert!((f[0] / -28250.0 - 1.0).abs() < 1e-3, "{f:?}");
    assert!((f[1] / -5013.4 - 1.0).abs() < 1e-3, "{f:?}");
    assert_eq!(f[2], 0.0);
    assert_eq!(field_from_millitesla([0.0; 3]), [0.0; 3]);
    let g = field_from_millitesla([35.5, 6.3, 0.0]);
    assert_eq!(g, vec3::scale(-1.0, f));
}

#[test]
fn mumag5_velocity() {
    let si = SIParameters::permalloy();
    let u = zhang_li_velocity(&si, MUMAG5_U);
    let expect = 72.17 / (si.gamma0 * si.ms * si.length);
    assert!((u[0] / expect - 1.0).abs() < 1e-6);
    assert_eq!((u[1], u[2]), (0.0, 0.0));
    assert_eq!(MUMAG5_BETA, 0.05);
}

#[test]
fn pi_examples() {
    let space = common::cube(2);
    let n = space.num_nodes();
    let m = common::random_field(n, 1);
    assert!(pi_apply(&PiKind::Zero, &space, m.values()).values().iter().all(|&v| v == [0.0; 3]));

    let uni = PiKind::Uniaxial { axis: E3, strength: 1.0 };
    assert!(pi_apply(&uni, &space, &vec![E3; n]).values().iter().all(|&v| v == E3));

    let zl = PiKind::ZhangLi { u: [1.0, 0.5, -0.2], beta_zl: 0.05 };
    let constant = vec![vec3::normalize([1.0, 1.0, 1.0]); n];
    assert!(pi_apply(&zl, &space, &constant).max_norm() < 1e-14);
}

#[test]
fn recovered_gradient_is_exact_for_linear_fields() {
    let space = common::cube(3);
    let g = [[0.5, -1.0, 2.0], [0.0, 3.0, 0.0], [1.0, 1.0, 1.0]];
    let m: Vec<[f64; 3]> = space.mesh().nodes().iter().map(|x| [vec3::dot(g[0], *x), vec3::dot(g[1], *x), vec3::dot(g[2], *x)]).collect();
    for r in recovered_nodal_gradients(&space, &m) {
        for c in 0..3 {
            assert!(common::max_abs_diff(&r[c], &g[c]) < 1e-12);
        }
    }
}

#[test]
fn zhang_li_on_a_linear_field() {
    // m = (1, x₁, 0) with u = e₁: (u·∇)m = e₂ and m × e₂ = (0, 0, 1)
    let space = common::cube(2);
    let m: Vec<[f64; 3]> = space.mesh().nodes().iter().map(|x| [1.0, x[0], 0.0]).collect();
    let pi = PiKind::ZhangLi { u: [1.0, 0.0, 0.0], beta_zl: 0.25 };
    for v in pi_apply(&pi, &space, &m).values() {
        assert!(common::max_abs_diff(v, &[0.0, 0.25, 1.0]) < 1e-12, "{v:?}");
    }
}

#[test]
fn pi_bound_holds_on_random_fields() {
    let space = common::cube(2);
    let kinds = [
        PiKind::Zero,
        PiKind::Uniaxial { axis: vec3::normalize([1.0, 2.0, 2.0]), strength: -3.0 },
        PiKind::ZhangLi { u: [0.3, -1.0, 0.4], beta_zl: 0.05 },
    ];
    for seed in 0..10 {
        let m = common::random_field(space.num_nodes(), seed);
        let grad = space.max_gradient_norm(m.values());
        for pi in &kinds {
            let out = pi_apply(pi, &space, m.values());
            assert!(out.max_norm() <= pi.bound_constant() * (1.0 + grad) * (1.0 + 1e-12), "{pi:?}");
        }
    }
}

#[test]
fn pi_validation() {
    assert!(PiKind::Uniaxial { axis: [1.0, 1.0, 0.0], strength: 1.0 }.validate().is_err());
    assert!(PiKind::ZhangLi { u: [f64::INFINITY, 0.0, 0.0], beta_zl: 0.0 }.validate().is_err());
    assert!(PiKind::Zero.validate().is_ok());
}

#[test]
fn applied_fields() {
    let x = [0.7, -2.0, 5.0];
    assert_eq!(AppliedField::Academic { amplitude: 10.0 }.eval(3.0, x), [10.0 * 0.7f64.sin(), 10.0 * 0.7f64.cos(), 0.0]);
    assert_eq!(AppliedField::Ramp { value: [1.0, 2.0, 3.0] }.eval(2.0, x), [2.0, 4.0, 6.0]);
    assert_eq!(AppliedField::Constant { value: [1.0, 0.0, 0.0] }.eval(9.0, x), [1.0, 0.0, 0.0]);
}

#[test]
fn field_config_json() {
    let cfg: EffectiveFieldConfig =
        serde_json::from_str(r#"{"pi": {"kind": "uniaxial", "axis": [0, 0, 1], "strength": 0.5}, "applied": {"kind": "academic"}}"#).unwrap();
    assert_eq!(cfg.pi, PiKind::Uniaxial { axis: E3, strength: 0.5 });
    assert_eq!(cfg.applied, AppliedField::Academic { amplitude: 10.0 });
    let zl: PiKind = serde_json::from_str(r#"{"kind": "zhang_li", "u": [1, 0, 0], "beta_zl": 0.05}"#).unwrap();
    assert!(matches!(zl, PiKind::ZhangLi { .. }));
    let empty: EffectiveFieldConfig = serde_json::from_str("{}").unwrap();
    assert_eq!(empty.pi, PiKind::Zero);
}
