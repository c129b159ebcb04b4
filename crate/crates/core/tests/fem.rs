mod common;

use std::sync::Arc;

use nalgebra::SymmetricEigen;
use rand::Rng;
use tangent_plane_llg::diagnostics::{csr_to_dense, random_vector};
use tangent_plane_llg::fem::{assemble_cross, assemble_mass, assemble_rhs, assemble_stiffness, AssembledSystem, FemSpace, VectorMatrix3N};
use tangent_plane_llg::field::NodalField3;
use tangent_plane_llg::{Error, Mesh};

fn reference_tet() -> Mesh {
    Mesh::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], vec![[0, 1, 2, 3]]).unwrap()
}

#[test]
fn reference_mass_entries() {
    let m = assemble_mass(&reference_tet());
    for i in 0..4 {
        for j in 0..4 {
            let expect = if i == j { 1.0 / 60.0 } else { 1.0 / 120.0 };
            assert!((m.matrix.get(i, j) - expect).abs() < 1e-16, "({i},{j})");
        }
    }
}

#[test]
fn mass_sums_to_volume_and_is_spd() {
    let space = common::cube(2);
    let m = space.mass();
    let total: f64 = (0..m.n()).map(|i| m.matrix.row(i).1.iter().sum::<f64>()).sum();
    assert!((total - 1.0).abs() < 1e-13);
    assert_eq!(m.matrix.max_abs_asymmetry(), 0.0);
    let eig = SymmetricEigen::new(csr_to_dense(&m.matrix)).eigenvalues;
    assert!(eig.min() > 0.0);
}

#[test]
fn reference_stiffness_origin_entry() {
    let l = assemble_stiffness(&reference_tet());
    assert!((l.matrix.get(0, 0) - 0.5).abs() < 1e-15);
    assert!((l.matrix.get(1, 1) - 1.0 / 6.0).abs() < 1e-15);
    assert!((l.matrix.get(0, 1) + 1.0 / 6.0).abs() < 1e-15);
}

#[test]
fn stiffness_rows_sum_to_zero_and_is_psd() {
    let space = common::cube(3);
    let l = space.stiffness();
    for i in 0..l.n() {
        assert!(l.matrix.row(i).1.iter().sum::<f64>().abs() < 1e-13);
    }
    let mut rng = common::rng(3);
    for _ in 0..100 {
        let x = random_vector(&mut rng, l.n());
        assert!(l.matrix.quadratic_form(&x, &x) >= -1e-14);
    }
    let eig = SymmetricEigen::new(csr_to_dense(&common::cube(2).stiffness().matrix)).eigenvalues;
    assert!(eig.min() > -1e-13);
}

#[test]
fn unit_weights_reproduce_mass_exactly() {
    let space = common::cube(2);
    let ne = space.mesh().num_elements();
    let m = space.mass();
    let w1 = space.weighted_mass(&vec![1.0; ne]).unwrap();
    assert_eq!(w1.matrix.to_dense(), m.matrix.to_dense());
    assert_eq!(w1.to_csr3().to_dense(), m.matrix.kron_identity(3).to_dense());
    let w2 = space.weighted_mass(&vec![2.0; ne]).unwrap();
    let doubled: Vec<Vec<f64>> = m.matrix.to_dense().into_iter().map(|r| r.into_iter().map(|v| 2.0 * v).collect()).collect();
    assert_eq!(w2.matrix.to_dense(), doubled);
}

#[test]
fn random_weights_give_spd_matrix() {
    let space = common::cube(2);
    let mut rng = common::rng(11);
    let w: Vec<f64> = (0..space.mesh().num_elements()).map(|_| rng.gen_range(0.5..3.0)).collect();
    let mk = space.weighted_mass(&w).unwrap();
    assert_eq!(mk.matrix.max_abs_asymmetry(), 0.0);
    assert!(SymmetricEigen::new(csr_to_dense(&mk.to_csr3())).eigenvalues.min() > 0.0);
}

#[test]
fn non_positive_weight_is_rejected() {
    let space = common::cube(1);
    let mut w = vec![1.0; space.mesh().num_elements()];
    w[3] = 0.0;
    assert!(matches!(space.weighted_mass(&w), Err(Error::InvalidParameter(_))));
}

#[test]
fn cross_of_constant_e3() {
    let space = common::cube(2);
    let n = space.num_nodes();
    let s = space.cross(&vec![[0.0, 0.0, 1.0]; n]).unwrap();
    let m = space.mass();
    for i in 0..n {
        for j in 0..n {
            let b = s.block(i, j);
            let mij = m.matrix.get(i, j);
            let expect = [[0.0, mij, 0.0], [-mij, 0.0, 0.0], [0.0, 0.0, 0.0]];
            for r in 0..3 {
                for c in 0..3 {
                    assert!((b[r][c] - expect[r][c]).abs() < 1e-15, "block ({i},{j})");
                }
            }
        }
    }
}

#[test]
fn cross_is_skew_and_odd_in_m() {
    let space = common::cube(2);
    let m = common::random_field(space.num_nodes(), 5);
    let s = space.cross(m.values()).unwrap().to_csr3();
    let d = csr_to_dense(&s);
    assert_eq!((&d + d.transpose()).amax(), 0.0);
    let mut rng = common::rng(6);
    for _ in 0..100 {
        let x = random_vector(&mut rng, 3 * space.num_nodes());
        assert!(s.quadratic_form(&x, &x).abs() < 1e-15);
    }
    let neg: Vec<[f64; 3]> = m.values().iter().map(|v| [-v[0], -v[1], -v[2]]).collect();
    let sn = csr_to_dense(&space.cross(&neg).unwrap().to_csr3());
    assert_eq!((&sn + &d).amax(), 0.0);
}

#[test]
fn cross_matches_direct_quadrature() {
    // (m × φ_i e_a, φ_j e_b) = Σ_c ε_{cab} ∫ m_c φ_i φ_j on a single tet,
    // with ∫ λ_p λ_q λ_r = |K| · 3! · (multiplicities)! / 6!
    let mesh = reference_tet();
    let m = [[0.3, -0.2, 0.9], [0.1, 0.7, -0.1], [-0.5, 0.5, 0.2], [0.0, 0.0, 1.0]];
    let s = match assemble_cross(&mesh, &m).unwrap() {
        VectorMatrix3N::Cross(c) => c,
        _ => unreachable!(),
    };
    let vol = 1.0 / 6.0;
    let triple = |p: usize, q: usize, r: usize| {
        let mut e = [0u32; 4];
        e[p] += 1;
        e[q] += 1;
        e[r] += 1;
        let f: [f64; 4] = e.map(|k| (1..=k).product::<u32>() as f64);
        vol * 6.0 * f.iter().product::<f64>() / 720.0
    };
    let eps = |c: usize, a: usize, b: usize| -> f64 {
        match (c, a, b) {
            (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
            (0, 2, 1) | (1, 0, 2) | (2, 1, 0) => -1.0,
            _ => 0.0,
        }
    };
    for i in 0..4 {
        for j in 0..4 {
            let blk = s.block(i, j);
            for a in 0..3 {
                for b in 0..3 {
                    let mut expect = 0.0;
                    for (p, mp) in m.iter().enumerate() {
                        for c in 0..3 {
                            expect += eps(c, a, b) * mp[c] * triple(p, i, j);
                        }
                    }
                    assert!((blk[a][b] - expect).abs() < 1e-16, "({i},{j},{a},{b})");
                }
            }
        }
    }
}

#[test]
fn rhs_examples() {
    let space = common::cube(2);
    let n = space.num_nodes();
    let mass = space.mass();
    let stiff = space.stiffness();
    let m = vec![[0.0, 0.6, 0.8]; n];
    let zero = NodalField3::zeros(n);
    assert!(space.rhs(&mass, &stiff, &m, &zero, 3.0).iter().all(|&v| v.abs() < 1e-14));

    let c = [1.5, -2.0, 0.25];
    let b = space.rhs(&mass, &stiff, &m, &NodalField3::constant(n, c), 3.0);
    for j in 0..n {
        let integral: f64 = mass.matrix.row(j).1.iter().sum();
        for k in 0..3 {
            assert!((b[3 * j + k] - c[k] * integral).abs() < 1e-14);
        }
    }

    let mr = common::random_field(n, 9);
    let lh = NodalField3(common::random_field(n, 10).values().to_vec());
    let b0 = space.rhs(&mass, &stiff, mr.values(), &lh, 0.0);
    assert_eq!(b0, mass.apply3(&lh.to_flat()));
    assert_eq!(assemble_rhs(space.mesh(), mr.values(), &lh, 0.0), b0);
}

#[test]
fn exchange_part_of_rhs_is_minus_stiffness_action() {
    let space = common::cube(2);
    let n = space.num_nodes();
    let m = common::random_field(n, 12);
    let b = space.rhs(&space.mass(), &space.stiffness(), m.values(), &NodalField3::zeros(n), 2.5);
    let lm = space.stiffness().apply3(&m.to_flat());
    for (x, y) in b.iter().zip(&lm) {
        assert!((x + 2.5 * y).abs() < 1e-13);
    }
}

#[test]
fn block_form_is_componentwise() {
    let space = common::cube(3);
    let n = space.num_nodes();
    let x = random_vector(&mut common::rng(2), 3 * n);
    for mat in [space.mass(), space.stiffness()] {
        let y = mat.apply3(&x);
        for c in 0..3 {
            let xc: Vec<f64> = (0..n).map(|i| x[3 * i + c]).collect();
            let yc = mat.matrix.mul_vec(&xc);
            for i in 0..n {
                assert_eq!(y[3 * i + c], yc[i]);
            }
        }
        assert_eq!(mat.to_csr3().mul_vec(&x), y);
    }
}

#[test]
fn system_is_positive_definite() {
    let space = common::cube(2);
    let n = space.num_nodes();
    let m = common::random_field(n, 21);
    let mass = Arc::new(space.mass());
    let stiffness = Arc::new(space.stiffness());
    let sys = AssembledSystem {
        alpha: 0.3,
        beta_k: 0.05,
        mass: mass.clone(),
        stiffness: stiffness.clone(),
        weighted_mass: space.weighted_mass(&vec![1.0; space.mesh().num_elements()]).unwrap(),
        cross: space.cross(m.values()).unwrap(),
        rhs: vec![0.0; 3 * n],
    };
    let a = sys.to_csr();
    let mut rng = common::rng(22);
    for _ in 0..100 {
        let x = random_vector(&mut rng, 3 * n);
        let ax = sys.apply(&x);
        assert!(common::dot(&x, &ax) > 0.0);
        assert!(common::max_abs_diff(&ax, &a.mul_vec(&x)) < 1e-13);
        let sx = sys.cross.apply(&x);
        assert!(common::dot(&x, &sx).abs() < 1e-14);
    }
}

#[test]
fn assembly_is_deterministic() {
    let a = common::cube(3);
    let b = Arc::new(FemSpace::new(a.mesh().clone()));
    let m = common::random_field(a.num_nodes(), 4);
    assert_eq!(a.mass().matrix.to_dense(), b.mass().matrix.to_dense());
    assert_eq!(a.stiffness().matrix.to_dense(), b.stiffness().matrix.to_dense());
    assert_eq!(a.cross(m.values()).unwrap().to_csr3().to_dense(), b.cross(m.values()).unwrap().to_csr3().to_dense());
}

#[test]
fn coordinate_dump_lists_every_entry() {
    let l = common::cube(1).stiffness();
    let mut out = Vec::new();
    l.matrix.write_coo(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), l.matrix.nnz());
    let first: Vec<&str> = text.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(first.len(), 3);
}
