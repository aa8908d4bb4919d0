use super::*;
use rand::SeedableRng;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn oh_pair(m: usize, n: usize, u: CMatrix) -> TensorElement {
    TensorElement::new(SpaceStructure::Oh(m), SpaceStructure::Oh(n), u).unwrap()
}

fn solver() -> SolverParams {
    SolverParams::default()
}

#[test]
fn rank_one_unit_in_oh_tensor_oh() {
    let t = oh_pair(2, 2, CMatrix::unit(2, 2, 0, 0));
    let (oh, rep) = oh_tensor_norm_ub(&t, None, &solver()).unwrap();
    assert!((oh - 1.0).abs() < 1e-6);
    assert!(rep.residual(&t.u) < 1e-10);
    let (h, _) = haagerup_norm_ub(&t, None, &solver()).unwrap();
    assert!((h - 1.0).abs() < 1e-9);
}

#[test]
fn scalar_tensor() {
    let u = CMatrix::from_row_major(1, 1, vec![c(5.0)]).unwrap();
    let t = oh_pair(1, 1, u);
    assert!((oh_tensor_norm_ub(&t, None, &solver()).unwrap().0 - 5.0).abs() < 1e-9);
    assert!((haagerup_norm_ub(&t, None, &solver()).unwrap().0 - 5.0).abs() < 1e-9);
}

#[test]
fn haagerup_on_oh_is_frobenius() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let u = CMatrix::random_gaussian(2, 3, &mut rng);
        let f = u.frobenius_norm();
        let (h, rep) = haagerup_norm_ub(&oh_pair(2, 3, u.clone()), None, &solver()).unwrap();
        assert!(h >= f - 1e-9 && h <= 1.03 * f, "{h} vs {f}");
        assert!(rep.residual(&u) <= 1e-10 * f);
    }
}

#[test]
fn oh_on_oh_is_operator_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let u = CMatrix::random_gaussian(3, 3, &mut rng);
        let op = linalg::operator_norm(&u);
        let (v, _) = oh_tensor_norm_ub(&oh_pair(3, 3, u), None, &solver()).unwrap();
        assert!(v >= op - 1e-9 && v <= 1.03 * op, "{v} vs {op}");
    }
    let d = CMatrix::from_diagonal(&[2.0, 1.0]);
    assert!((oh_tensor_norm_ub(&oh_pair(2, 2, d), None, &solver()).unwrap().0 - 2.0).abs() < 0.06);
}

#[test]
fn rank_one_haagerup_never_exceeds_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let e = SpaceStructure::Row(3);
    let f = SpaceStructure::Column(2);
    let x = CMatrix::random_gaussian(3, 1, &mut rng);
    let y = CMatrix::random_gaussian(2, 1, &mut rng);
    let u = CMatrix::wrap(x.as_dmatrix() * y.as_dmatrix().transpose());
    let t = TensorElement::new(e.clone(), f.clone(), u).unwrap();
    let nx = e.level_norm(&MatrixTuple::scalars(&x.row_major()).unwrap()).unwrap();
    let ny = f.level_norm(&MatrixTuple::scalars(&y.row_major()).unwrap()).unwrap();
    let (h, _) = haagerup_norm_ub(&t, None, &solver()).unwrap();
    assert!(h <= nx * ny * (1.0 + 1e-9));
}

#[test]
fn rank_below_rank_of_u_is_infeasible() {
    let t = oh_pair(2, 2, CMatrix::identity(2));
    assert!(matches!(haagerup_norm_ub(&t, Some(1), &solver()), Err(Error::Infeasible(_))));
}

#[test]
fn concatenated_representations_are_subadditive() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let e = SpaceStructure::Row(2);
    let f = SpaceStructure::Oh(2);
    let u = CMatrix::random_gaussian(2, 2, &mut rng);
    let v = CMatrix::random_gaussian(2, 2, &mut rng);
    let tu = TensorElement::new(e.clone(), f.clone(), u.clone()).unwrap();
    let tv = TensorElement::new(e.clone(), f.clone(), v.clone()).unwrap();
    let tw = TensorElement::new(e, f, u.add(&v).unwrap()).unwrap();
    let (hu, ru) = haagerup_norm_ub(&tu, None, &solver()).unwrap();
    let (hv, rv) = haagerup_norm_ub(&tv, None, &solver()).unwrap();
    let (hw, _) = haagerup_norm_ub_seeded(&tw, None, &solver(), &[ru.concat(&rv).unwrap()]).unwrap();
    assert!(hw <= hu + hv + 1e-9, "{hw} > {hu} + {hv}");
    // homogeneity
    let (h2, _) = haagerup_norm_ub(&tu.scaled(c(-2.0)), None, &solver()).unwrap();
    assert!((h2 - 2.0 * hu).abs() <= 1e-6 * hu);
}

#[test]
fn cb_identity_and_scaling_on_oh() {
    let s = SpaceStructure::Oh(3);
    let id = CoeffMap::new(s.clone(), s.clone(), CMatrix::identity(3)).unwrap();
    let est = cb_level_estimates(&id, 3, &solver()).unwrap();
    assert!(est.levels.iter().all(|v| (v - 1.0).abs() < 1e-9), "{:?}", est.levels);
    let two = CoeffMap::new(s.clone(), s, CMatrix::identity(3).scale(c(2.0))).unwrap();
    assert!((cb_level_lower(&two, 2, &solver()).unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn cb_on_oh_matches_operator_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = SpaceStructure::Oh(3);
    for _ in 0..3 {
        let m = CMatrix::random_gaussian(3, 3, &mut rng);
        let map = CoeffMap::new(s.clone(), s.clone(), m.clone()).unwrap();
        let exact = cb_norm_oh_exact(&map).unwrap();
        assert!((exact - linalg::operator_norm(&m)).abs() < 1e-12);
        let est = cb_level_estimates(&map, 3, &solver()).unwrap();
        for w in est.levels.windows(2) {
            assert!(w[1] >= w[0]);
        }
        for v in &est.levels {
            assert!((v - exact).abs() < 1e-6, "{v} vs {exact}");
        }
    }
    let diag = CoeffMap::new(s.clone(), s, CMatrix::from_diagonal(&[1.0, 2.0, 3.0])).unwrap();
    assert_eq!(cb_norm_oh_exact(&diag).unwrap(), 3.0);
    let wrong = CoeffMap::new(SpaceStructure::Row(2), SpaceStructure::Oh(2), CMatrix::identity(2)).unwrap();
    assert!(matches!(cb_norm_oh_exact(&wrong), Err(Error::Unsupported(_))));
}

#[test]
fn cb_levels_nondecreasing_for_row_to_column() {
    // id: R_2 → C_2 has norm 1 at level 1 and cb norm √2
    let map = CoeffMap::new(SpaceStructure::Row(2), SpaceStructure::Column(2), CMatrix::identity(2)).unwrap();
    let est = cb_level_estimates(&map, 2, &solver()).unwrap();
    assert!((est.levels[0] - 1.0).abs() < 1e-6);
    assert!(est.levels[1] >= est.levels[0]);
    assert!(est.levels[1] <= 2f64.sqrt() + 1e-9);
    assert!(est.levels[1] >= 2f64.sqrt() - 1e-3, "{:?}", est.levels);
}

fn matrix_units_tensor(u: CMatrix) -> TensorElement {
    let n = (u.rows() as f64).sqrt() as usize;
    let s = SpaceStructure::Concrete(ConcreteBasis::matrix_units(n));
    TensorElement::new(s.clone(), s, u).unwrap()
}

// U for x ⊗ y in the matrix-unit basis: U[(ij),(kl)] = x_ij y_kl
fn elementary(x: &CMatrix, y: &CMatrix) -> CMatrix {
    let (xv, yv) = (x.row_major(), y.row_major());
    CMatrix::from_row_major(xv.len(), yv.len(), xv.iter().flat_map(|a| yv.iter().map(move |b| a * b)).collect()).unwrap()
}

#[test]
fn phi_of_identity_and_units() {
    let id = phi_map(&matrix_units_tensor(elementary(&CMatrix::identity(2), &CMatrix::identity(2)))).unwrap();
    assert!(id.matrix.sub(&CMatrix::identity(4)).unwrap().frobenius_norm() < 1e-15);

    let e11 = CMatrix::unit(2, 2, 0, 0);
    let phi = phi_map(&matrix_units_tensor(elementary(&e11, &e11))).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = CMatrix::random_gaussian(2, 2, &mut rng);
    let out = phi.apply(&a.row_major());
    let expected = e11.matmul(&a).unwrap().matmul(&e11).unwrap().row_major();
    for (p, q) in out.iter().zip(&expected) {
        assert!((p - q).norm() < 1e-15);
    }
}

#[test]
fn phi_is_linear_and_multiplicative_on_units() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let u = CMatrix::random_gaussian(4, 4, &mut rng);
    let v = CMatrix::random_gaussian(4, 4, &mut rng);
    let (al, be) = (C64::new(0.5, -1.0), C64::new(2.0, 0.3));
    let lhs = phi_map(&matrix_units_tensor(u.scale(al).add(&v.scale(be)).unwrap())).unwrap().matrix;
    let rhs = phi_map(&matrix_units_tensor(u)).unwrap().matrix.scale(al).add(&phi_map(&matrix_units_tensor(v)).unwrap().matrix.scale(be)).unwrap();
    assert!(lhs.sub(&rhs).unwrap().frobenius_norm() < 1e-12);

    // Φ(x⊗y)∘Φ(x'⊗y') = Φ(xx'⊗y'y)
    let units: Vec<CMatrix> = (0..4).map(|i| CMatrix::unit(2, 2, i / 2, i % 2)).collect();
    for x in &units {
        for y in &units {
            for xp in &units {
                for yp in &units {
                    let a = phi_map(&matrix_units_tensor(elementary(x, y))).unwrap().matrix;
                    let b = phi_map(&matrix_units_tensor(elementary(xp, yp))).unwrap().matrix;
                    let c = phi_map(&matrix_units_tensor(elementary(&x.matmul(xp).unwrap(), &yp.matmul(y).unwrap())))
                        .unwrap()
                        .matrix;
                    assert_eq!(a.matmul(&b).unwrap(), c);
                }
            }
        }
    }
}

#[test]
fn row_column_constants() {
    let s = SpaceStructure::Concrete(ConcreteBasis::matrix_units(2));
    let id = CoeffMap::new(s.clone(), s.clone(), CMatrix::identity(4)).unwrap();
    let (r, cc) = row_column_constant(&id, 3, &solver()).unwrap();
    assert!((r - 1.0).abs() < 1e-9 && (cc - 1.0).abs() < 1e-9);

    let half = CoeffMap::new(s.clone(), s.clone(), CMatrix::identity(4).scale(c(0.5))).unwrap();
    let (r, cc) = row_column_constant(&half, 3, &solver()).unwrap();
    assert!((r - 0.5).abs() < 1e-9 && (cc - 0.5).abs() < 1e-9);

    // transpose: e_pq ↦ e_qp
    let mut t = DMatrix::<C64>::zeros(4, 4);
    for p in 0..2 {
        for q in 0..2 {
            t[(q * 2 + p, p * 2 + q)] = c(1.0);
        }
    }
    let tr = CoeffMap::new(s.clone(), s, CMatrix::wrap(t)).unwrap();
    let (r, cc) = row_column_constant(&tr, 3, &solver()).unwrap();
    assert!(cc >= 2f64.sqrt() - 1e-6 && r >= 2f64.sqrt() - 1e-6, "{r} {cc}");
}

#[test]
fn tensor_dimension_checks() {
    assert!(TensorElement::new(SpaceStructure::Oh(2), SpaceStructure::Oh(3), CMatrix::zeros(3, 3)).is_err());
    assert!(CoeffMap::new(SpaceStructure::Oh(2), SpaceStructure::Oh(3), CMatrix::zeros(2, 2)).is_err());
    let t = oh_pair(2, 2, CMatrix::identity(2));
    assert!(phi_map(&t).is_err());
}
