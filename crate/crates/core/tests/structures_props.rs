mod common;

use fibration_forge::angles::{principal_angles_conjugate, ComplexSubspace};
use fibration_forge::numeric::{condition_number, min_abs_imag_eigenvalue, CMatrix, RealLinearMap};
use fibration_forge::sampling::{
    random_complex_structure, random_invertible, random_orthogonal, random_orthogonal_structure,
    rng_from_seed,
};
use fibration_forge::structures::{
    full_retraction, is_orthogonal_structure, make_complex_structure, mckay_path, open_scissors,
    split_orthogonality_defect, ComplexStructure, RetractionPath, ScissorsFrame,
};
use fibration_forge::ForgeError;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use common::valid_map;

fn m2(a: f64, b: f64, c: f64, d: f64) -> RealLinearMap {
    RealLinearMap::from_row_slice(2, &[a, b, c, d]).unwrap()
}

fn structure(m: DMatrix<f64>) -> ComplexStructure {
    ComplexStructure::new(RealLinearMap::new(m).unwrap(), 1e-9).unwrap()
}

fn square_plus_identity(j: &DMatrix<f64>) -> f64 {
    let d = j.nrows();
    (j * j + DMatrix::identity(d, d)).norm()
}

fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let dim = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(dim, dim);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, at), b.shape()).copy_from(b);
        at += b.nrows();
    }
    out
}

fn b_structure(b: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, b, -1.0 / b, 0.0])
}

/// Largest distance from the columns of `a` to the span of the
/// orthonormal columns of `b`.
fn span_gap(a: &CMatrix, b: &CMatrix) -> f64 {
    let proj = b * (b.adjoint() * a);
    (0..a.ncols()).map(|j| (a.column(j) - proj.column(j)).norm()).fold(0.0, f64::max)
}

#[test]
fn two_by_two_structure_from_eigenvalues() {
    // eigenvalues a ± bi from the quadratic formula give J_T = (T − aI)/b
    let t = m2(1.0, 2.0, -1.0, 1.0);
    let (tr, det) = (2.0, 3.0);
    let a = tr / 2.0;
    let b = ((4.0 * det - tr * tr) as f64).sqrt() / 2.0;
    let oracle = (t.matrix() - DMatrix::identity(2, 2) * a) / b;
    let j = make_complex_structure(&t, 1e-9).unwrap();
    assert!((j.matrix() - &oracle).norm() < 1e-12);
    let expected = DMatrix::from_row_slice(2, 2, &[0.0, 2f64.sqrt(), -1.0 / 2f64.sqrt(), 0.0]);
    assert!((j.matrix() - expected).norm() < 1e-12);
    assert!(square_plus_identity(j.matrix()) < 1e-12);
}

#[test]
fn structures_are_fixed_points() {
    let rot = m2(0.0, 1.0, -1.0, 0.0);
    let j = make_complex_structure(&rot, 1e-9).unwrap();
    assert!((j.matrix() - rot.matrix()).norm() < 1e-14);

    let mut rng = rng_from_seed(11);
    let generic = random_complex_structure(&mut rng, 6, 10.0);
    let j = make_complex_structure(&RealLinearMap::new(generic.clone()).unwrap(), 1e-9).unwrap();
    assert!((j.matrix() - generic).norm() < 1e-9);
}

#[test]
fn block_diagonal_splits_blockwise() {
    let t1 = m2(1.0, 2.0, -1.0, 1.0);
    let t2 = m2(-3.0, 5.0, -2.0, 0.5);
    let t = RealLinearMap::new(block_diag(&[t1.matrix().clone(), t2.matrix().clone()])).unwrap();
    let j = make_complex_structure(&t, 1e-9).unwrap();
    let j1 = make_complex_structure(&t1, 1e-9).unwrap();
    let j2 = make_complex_structure(&t2, 1e-9).unwrap();
    let expected = block_diag(&[j1.matrix().clone(), j2.matrix().clone()]);
    assert!((j.matrix() - expected).norm() < 1e-10);
}

#[test]
fn real_eigenvalue_is_rejected() {
    let id = RealLinearMap::identity(2).unwrap();
    assert!(matches!(make_complex_structure(&id, 1e-9), Err(ForgeError::RealEigenvalue { .. })));
    assert!(matches!(mckay_path(&id, 0.5), Err(ForgeError::RealEigenvalue { .. })));
    assert!(matches!(full_retraction(&id, 0.5), Err(ForgeError::RealEigenvalue { .. })));
}

#[test]
fn mckay_midpoint_example() {
    let t = m2(1.0, 2.0, -1.0, 1.0);
    let s2 = 2f64.sqrt();
    let half = mckay_path(&t, 0.5).unwrap();
    let expected = DMatrix::from_row_slice(2, 2, &[0.5, 1.0 + s2 / 2.0, -0.5 - s2 / 4.0, 0.5]);
    assert!((half.matrix() - expected).norm() < 1e-12);
    let m = half.matrix();
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    assert!(tr * tr - 4.0 * det < 0.0);
    assert_eq!(mckay_path(&t, 0.0).unwrap(), t);
    let j = make_complex_structure(&t, 1e-9).unwrap();
    assert!((mckay_path(&t, 1.0).unwrap().matrix() - j.matrix()).norm() < 1e-15);
}

#[test]
fn orthogonality_examples() {
    assert!(is_orthogonal_structure(&structure(b_structure(1.0)), 1e-9));
    assert!(!is_orthogonal_structure(&structure(b_structure(2.0)), 1e-9));
    assert!(split_orthogonality_defect(&structure(b_structure(1.0))) < 1e-12);
    assert!((split_orthogonality_defect(&structure(b_structure(2.0))) - 0.6).abs() < 1e-12);
    let mixed = block_diag(&[b_structure(1.0), b_structure(2.0)]);
    assert!((split_orthogonality_defect(&structure(mixed)) - 0.6).abs() < 1e-12);
    let mut rng = rng_from_seed(5);
    let orth = structure(random_orthogonal_structure(&mut rng, 8));
    assert!(is_orthogonal_structure(&orth, 1e-9));
    assert!(split_orthogonality_defect(&orth) < 1e-8);
}

#[test]
fn scissors_closes_two_dimensional_case() {
    let j = structure(b_structure(2.0));
    let end = open_scissors(&j, 1.0).unwrap();
    let expected = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    assert!((end.matrix() - expected).norm() < 1e-8);
    assert!((open_scissors(&j, 0.0).unwrap().matrix() - j.matrix()).norm() < 1e-10);
    for k in 0..=10 {
        let jt = open_scissors(&j, k as f64 / 10.0).unwrap();
        assert!(square_plus_identity(jt.matrix()) < 1e-12);
        // the rotation sense is kept: J e₁ has a negative second coordinate
        assert!(jt.matrix()[(1, 0)] < 0.0);
    }
}

#[test]
fn orthogonal_structure_is_not_moved() {
    let mut rng = rng_from_seed(9);
    for dim in [2, 4, 6] {
        let j = structure(random_orthogonal_structure(&mut rng, dim));
        for k in 0..=4 {
            let t = k as f64 / 4.0;
            assert!((open_scissors(&j, t).unwrap().matrix() - j.matrix()).norm() < 1e-8);
            assert!((full_retraction(j.map(), t).unwrap().matrix() - j.matrix()).norm() < 1e-8);
        }
    }
}

#[test]
fn retraction_path_endpoints() {
    let mut rng = rng_from_seed(21);
    let t = valid_map(&mut rng, 6);
    let path = RetractionPath::new(&t, 1e-9).unwrap();
    assert_eq!(&path.eval(0.0), &t);
    assert!((path.eval(0.5).matrix() - path.complex_structure().matrix()).norm() < 1e-12);
    assert!(path.junction_residual() < 1e-8);
    let end = structure(path.endpoint().into_matrix());
    assert!(is_orthogonal_structure(&end, 1e-7));
    assert_eq!(full_retraction(&t, 0.8).unwrap(), path.eval(0.8));
}

/// Rotates coincidence vectors inside blocks of equal angle; such a real
/// rotation keeps `v·v` real and `⟨v_i, v̄_j⟩ = 0`.
fn remix(v: &CMatrix, blocks: &[(usize, usize)], seed: u64) -> CMatrix {
    let mut rng = rng_from_seed(seed);
    let k = v.ncols();
    let mut r = DMatrix::<f64>::identity(k, k);
    for &(start, len) in blocks {
        r.view_mut((start, start), (len, len)).copy_from(&random_orthogonal(&mut rng, len));
    }
    v * r.map(|x| Complex64::new(x, 0.0))
}

#[test]
fn equal_angle_remixing_does_not_change_scissors() {
    let mut rng = rng_from_seed(33);
    // b = 2 and b = −1/2 share an angle; b = 3 has a smaller one
    let base = block_diag(&[b_structure(2.0), b_structure(-0.5), b_structure(3.0)]);
    let g = random_orthogonal(&mut rng, 6);
    let j = structure(&g * base * g.transpose());
    let profile = principal_angles_conjugate(&ComplexSubspace::spanned_by(&j.plus_space()).unwrap()).unwrap();
    let a = &profile.angles;
    assert!((a[1] - a[2]).abs() < 1e-10 && (a[1] - a[0]).abs() > 0.1);
    let v = profile.first.clone();
    let reference = ScissorsFrame::from_coincidence_basis(&v).unwrap();
    for seed in 0..8 {
        let mixed = ScissorsFrame::from_coincidence_basis(&remix(&v, &[(1, 2)], seed)).unwrap();
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            assert!((mixed.at(t) - reference.at(t)).norm() < 1e-7);
        }
    }
    for k in 0..=10 {
        let t = k as f64 / 10.0;
        assert!((reference.at(t) - open_scissors(&j, t).unwrap().matrix()).norm() < 1e-7);
    }
}

#[test]
fn fully_degenerate_angles_remix() {
    // every angle equal: any real rotation of the coincidence basis is allowed
    let mut rng = rng_from_seed(34);
    let base = block_diag(&[b_structure(2.0), b_structure(2.0), b_structure(-0.5)]);
    let g = random_orthogonal(&mut rng, 6);
    let j = structure(&g * base * g.transpose());
    let v = principal_angles_conjugate(&ComplexSubspace::spanned_by(&j.plus_space()).unwrap())
        .unwrap()
        .first;
    let reference = ScissorsFrame::from_coincidence_basis(&v).unwrap();
    for seed in 0..8 {
        let mixed = ScissorsFrame::from_coincidence_basis(&remix(&v, &[(0, 3)], seed)).unwrap();
        assert!((mixed.at(1.0) - reference.at(1.0)).norm() < 1e-7);
        assert!((mixed.at(0.3) - reference.at(0.3)).norm() < 1e-7);
    }
}

fn even_dim() -> impl Strategy<Value = usize> {
    prop_oneof![Just(4usize), Just(6), Just(8), Just(12)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn structure_squares_to_minus_identity(seed in any::<u64>(), dim in even_dim()) {
        let mut rng = rng_from_seed(seed);
        let t = valid_map(&mut rng, dim);
        let j = make_complex_structure(&t, 1e-9).unwrap();
        prop_assert!(square_plus_identity(j.matrix()) < 1e-7);
        // J_T shares T's conjugate split: V+(T) is the +i space of J_T
        let vt = fibration_forge::numeric::eigen_split(&t, 1e-9).unwrap();
        prop_assert!(span_gap(vt.basis_plus(), &j.plus_space()) < 1e-6);
    }

    #[test]
    fn gl_equivariance(seed in any::<u64>(), dim in even_dim()) {
        let mut rng = rng_from_seed(seed);
        let t = valid_map(&mut rng, dim);
        let g = random_invertible(&mut rng, dim, 100.0);
        let g_inv = g.clone().try_inverse().unwrap();
        let conj = RealLinearMap::new(&g * t.matrix() * &g_inv).unwrap();
        let lhs = make_complex_structure(&conj, 1e-9).unwrap();
        let rhs = &g * make_complex_structure(&t, 1e-9).unwrap().matrix() * &g_inv;
        let scale = rhs.norm().max(1.0);
        prop_assert!((lhs.matrix() - rhs).norm() < 1e-6 * condition_number(&g) * scale);
    }

    #[test]
    fn paths_avoid_real_eigenvalues(seed in any::<u64>(), dim in prop_oneof![Just(4usize), Just(6)]) {
        let mut rng = rng_from_seed(seed);
        let t = valid_map(&mut rng, dim);
        let path = RetractionPath::new(&t, 1e-9).unwrap();
        for k in 0..=100 {
            let s = k as f64 / 100.0;
            let m = mckay_path(&t, s).unwrap();
            prop_assert!(min_abs_imag_eigenvalue(m.matrix()).unwrap() > 0.0);
            prop_assert!(min_abs_imag_eigenvalue(path.eval(s).matrix()).unwrap() > 0.0);
        }
    }

    #[test]
    fn structure_depends_continuously(seed in any::<u64>(), dim in prop_oneof![Just(4usize), Just(6), Just(8)]) {
        let mut rng = rng_from_seed(seed);
        let t = valid_map(&mut rng, dim);
        let mut delta = fibration_forge::sampling::gaussian_matrix(&mut rng, dim, dim);
        delta *= 1e-6 / delta.norm();
        let moved = RealLinearMap::new(t.matrix() + delta).unwrap();
        let j0 = make_complex_structure(&t, 1e-9).unwrap();
        let j1 = make_complex_structure(&moved, 1e-9).unwrap();
        // first-order bound for a spectral projector: |dJ| ≲ |J|²|δ| / gap
        let gap = min_abs_imag_eigenvalue(t.matrix()).unwrap();
        let bound = 10.0 * j0.matrix().norm_squared() * 1e-6 / gap;
        prop_assert!((j1.matrix() - j0.matrix()).norm() < bound.min(1.0));
    }

    #[test]
    fn scissors_end_orthogonal(seed in any::<u64>(), n in 2usize..=4) {
        let mut rng = rng_from_seed(seed);
        let j = structure(random_complex_structure(&mut rng, 2 * n, 10.0));
        for k in 0..=10 {
            let jt = open_scissors(&j, k as f64 / 10.0).unwrap();
            prop_assert!(square_plus_identity(jt.matrix()) < 1e-7);
        }
        let end = open_scissors(&j, 1.0).unwrap();
        prop_assert!(is_orthogonal_structure(&end, 1e-7));
        prop_assert!(split_orthogonality_defect(&end) < 1e-7);
    }

    #[test]
    fn scissors_orthogonal_equivariance(seed in any::<u64>(), n in 2usize..=4, t in 0.0f64..=1.0) {
        let mut rng = rng_from_seed(seed);
        let j = structure(random_complex_structure(&mut rng, 2 * n, 10.0));
        let g = random_orthogonal(&mut rng, 2 * n);
        let moved = structure(&g * j.matrix() * g.transpose());
        let lhs = open_scissors(&moved, t).unwrap();
        let rhs = &g * open_scissors(&j, t).unwrap().matrix() * g.transpose();
        prop_assert!((lhs.matrix() - rhs).norm() < 1e-6);
    }

    #[test]
    fn scissors_keeps_conjugate_pair(seed in any::<u64>(), n in 1usize..=4, t in 0.0f64..=1.0) {
        let mut rng = rng_from_seed(seed);
        let j = structure(random_complex_structure(&mut rng, 2 * n, 10.0));
        let jt = open_scissors(&j, t).unwrap();
        let plus = jt.plus_space();
        // V−(t) computed independently as the +i space of −J(t)
        let minus = structure(-jt.matrix()).plus_space();
        prop_assert!(span_gap(&plus.map(|z| z.conj()), &minus) < 1e-8);
    }
}
