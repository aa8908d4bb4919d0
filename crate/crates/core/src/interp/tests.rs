use super::*;
use crate::spaces::{oh_level_norm, EmbeddedNorm, MatrixNormKind, MatrixTuple};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..n).map(|_| complex_gaussian(rng)).collect()
}

fn quick() -> SolverParams {
    SolverParams { degree: 4, grid: 32, restarts: 2, max_iters: 150, polish_iters: 60, ..SolverParams::default() }
}

#[test]
fn linf_l1_unit_vector_matches_euclidean() {
    let cl = CoupleLevel::linf_l1(3);
    let x = vec![c(1.0), c(0.0), c(0.0)];
    let b = interp_norm_bounds(&cl, 0.5, &x, &SolverParams::default()).unwrap();
    assert!(b.upper >= 1.0 - 1e-9 && b.upper <= 1.03, "{b:?}");
    assert!(b.lower >= 0.97 && b.lower <= b.upper + 1e-9);
}

#[test]
fn linf_l1_random_vector_sandwich() {
    let cl = CoupleLevel::linf_l1(3);
    let x = random_vec(3, &mut ChaCha8Rng::seed_from_u64(4));
    let e = euclid(&x);
    let b = interp_norm_bounds(&cl, 0.5, &x, &SolverParams::default()).unwrap();
    assert!(b.lower <= e * (1.0 + 1e-9) && e <= b.upper * (1.0 + 1e-9), "{} {} {}", b.lower, e, b.upper);
    assert!(b.relative_width() <= 0.06);
}

#[test]
fn equal_couple_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = Arc::new(EmbeddedNorm::row(2, 2, 2, MatrixNormKind::Operator));
    let d = Arc::new(EmbeddedNorm::row(2, 2, 2, MatrixNormKind::Trace));
    let cl = CoupleLevel::equal(n.clone(), Some(d));
    let x = random_vec(8, &mut rng);
    let nx = n.norm(&x);
    let b = interp_norm_bounds(&cl, 0.3, &x, &quick()).unwrap();
    assert!((b.upper - nx).abs() <= 0.01 * nx, "{} vs {nx}", b.upper);
    assert!(b.lower >= nx / 1.01 && b.lower <= b.upper + 1e-9);
}

#[test]
fn degree_zero_is_the_constant_function() {
    let cl = CoupleLevel::linf_l1(3);
    let x = vec![c(1.0), c(2.0), c(-1.0)];
    let ub = interp_upper_bound(&cl, 0.4, &x, &SolverParams { degree: 0, ..quick() }).unwrap();
    assert_eq!(ub.value, 4.0);
    assert_eq!(ub.witness.degree(), 0);
}

#[test]
fn log_convexity_witness_is_never_beaten_upward() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cl = CoupleLevel::linf_l1(4);
    for theta in [0.2, 0.5, 0.8] {
        let x = random_vec(4, &mut rng);
        let (a0, a1) = (cl.n0.norm(&x), cl.n1.norm(&x));
        let ub = interp_upper_bound(&cl, theta, &x, &SolverParams { degree: 1, ..quick() }).unwrap();
        assert!(ub.value <= a0.powf(1.0 - theta) * a1.powf(theta) * (1.0 + 1e-12));
    }
}

#[test]
fn upper_bound_nonincreasing_in_degree_with_warm_start() {
    let cl = CoupleLevel::linf_l1(3);
    let x = random_vec(3, &mut ChaCha8Rng::seed_from_u64(10));
    let mut prev: Option<UpperBound> = None;
    for m in 0..=4 {
        let solver = SolverParams { degree: m, ..quick() };
        let seeds: Vec<StripFunction> = prev.iter().map(|p| p.witness.clone()).collect();
        let ub = interp_upper_bound_seeded(&cl, 0.5, &x, &solver, &seeds).unwrap();
        if let Some(p) = &prev {
            assert!(ub.value <= p.value * (1.0 + 1e-12), "m={m}: {} > {}", ub.value, p.value);
        }
        prev = Some(ub);
    }
}

#[test]
fn reversal_symmetry() {
    let cl = CoupleLevel::linf_l1(3);
    let x = random_vec(3, &mut ChaCha8Rng::seed_from_u64(12));
    let solver = SolverParams::default();
    let a = interp_norm_bounds(&cl, 0.3, &x, &solver).unwrap();
    let b = interp_norm_bounds(&cl.reversed(), 0.7, &x, &solver).unwrap();
    // both brackets contain the same exact value, so they overlap
    assert!(a.lower <= b.upper * (1.0 + 1e-9) && b.lower <= a.upper * (1.0 + 1e-9));
    assert!((a.upper - b.upper).abs() <= 0.03 * a.upper);
}

#[test]
fn witness_evaluates_to_x_at_theta() {
    let cl = CoupleLevel::linf_l1(2);
    let x = vec![c(0.5), C64::new(0.0, 2.0)];
    let ub = interp_upper_bound(&cl, 0.35, &x, &quick()).unwrap();
    let at = ub.witness.eval(c(0.35));
    for (a, b) in at.iter().zip(&x) {
        assert!((a - b).norm() < 1e-12);
    }
    // grid max recomputed from strip evaluations agrees with the reported value
    let grid = conformal_boundary_grid(0.35, quick().grid).unwrap();
    let recomputed = grid
        .iter()
        .filter_map(|p| {
            let v = ub.witness.eval_boundary(p)?;
            Some(if p.label == 0 { cl.n0.norm(&v) } else { cl.n1.norm(&v) })
        })
        .fold(0.0, f64::max);
    assert!(recomputed <= ub.value * (1.0 + 1e-9));
}

#[test]
fn lower_bound_needs_duals() {
    use crate::spaces::SpaceStructure;
    let cl = CoupleLevel::from_structures(&SpaceStructure::Oh(2), &SpaceStructure::Row(2), 2, 2).unwrap();
    let x = random_vec(8, &mut ChaCha8Rng::seed_from_u64(1));
    assert!(matches!(interp_lower_bound(&cl, 0.5, &x, &quick()), Err(Error::Unsupported(_))));
}

#[test]
fn row_column_couple_brackets_oh() {
    use crate::spaces::SpaceStructure;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cl = CoupleLevel::from_structures(&SpaceStructure::Row(2), &SpaceStructure::Column(2), 2, 2).unwrap();
    let a = MatrixTuple::random(2, 2, 2, &mut rng);
    let oh = oh_level_norm(&a).unwrap();
    let b = interp_norm_bounds(&cl, 0.5, &a.to_flat(), &SolverParams::default()).unwrap();
    assert!(b.upper >= oh - 1e-9 && b.upper <= 1.05 * oh);
    assert!(b.lower <= oh + 1e-6 && b.lower >= 0.95 * oh);
}

#[test]
fn hilbertian_closed_forms() {
    let g = HermitianPD::random(3, &mut ChaCha8Rng::seed_from_u64(3));
    let same = hilbertian_interp(&g, &g, 0.4).unwrap();
    assert!(same.matrix().sub(g.matrix()).unwrap().frobenius_norm() < 1e-9);

    let w = [1.0, 4.0, 9.0];
    let mean = hilbertian_interp(&HermitianPD::identity(3), &HermitianPD::from_diagonal(&w).unwrap(), 0.5).unwrap();
    for (i, wi) in w.iter().enumerate() {
        assert!((mean.matrix().get(i, i).re - wi.sqrt()).abs() < 1e-8);
    }
}

#[test]
fn hilbertian_couple_sandwiches_geometric_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g0 = HermitianPD::random(2, &mut rng);
    let g1 = HermitianPD::random(2, &mut rng);
    let gm = hilbertian_interp(&g0, &g1, 0.5).unwrap();
    let x = random_vec(2, &mut rng);
    let b = interp_norm_bounds(&CoupleLevel::hilbertian(&g0, &g1).unwrap(), 0.5, &x, &SolverParams::default()).unwrap();
    assert!(b.contains(gm.norm_of(&x), 0.03));
}

#[test]
fn invalid_inputs() {
    let cl = CoupleLevel::linf_l1(2);
    let x = vec![c(1.0), c(1.0)];
    assert!(matches!(interp_upper_bound(&cl, 1.0, &x, &quick()), Err(Error::Input(_))));
    assert!(matches!(interp_upper_bound(&cl, 0.5, &x[..1], &quick()), Err(Error::Dimension(_))));
    assert!(matches!(conformal_boundary_grid(0.5, 4), Err(Error::Config(_))));
    let zero = interp_norm_bounds(&cl, 0.5, &[c(0.0), c(0.0)], &quick()).unwrap();
    assert_eq!((zero.lower, zero.upper), (0.0, 0.0));
}
