use fex_core::extremal::{decompose_free_extreme, split_beta, verify_certificate, ConvexBodyOracle, PencilOracle, Tolerances};
use fex_core::generalized::sample_members;
use fex_core::linalg::{min_eigenvalue, Matrix, SymMatrix};
use fex_core::pencil::{LinearPencil, MatrixTuple};
use fex_core::random;
use fex_core::spectrahedrop::{
    dilation_scale, dnt_violating_witness, drop_dilation_subspace, drop_membership, factor_block_matrix,
    gram_test_matrix, necessary_condition_scan, phi_block, sample_v_block_matrix, DropDescription, DropOracle,
};
use rand::Rng;

fn disc() -> (DropDescription, DropOracle) {
    let dd = DropDescription::disc();
    let k = DropOracle::new(dd.clone()).unwrap();
    (dd, k)
}

#[test]
fn oracle_membership_matches_lifted_membership() {
    let (dd, k) = disc();
    let mut rng = random::rng(3);
    for i in 0..100 {
        let n = 1 + i % 3;
        let x = MatrixTuple::new(vec![random::sym_gaussian(&mut rng, n).scale(rng.random_range(0.1..0.9))]).unwrap();
        let a = k.membership(&x).unwrap();
        let b = drop_membership(&dd, &x, 1e-7).unwrap();
        assert_eq!(a.inside, b.inside, "{x:?}");
    }
}

#[test]
fn without_lift_matches_the_spectrahedron_bitwise() {
    let a = LinearPencil::cube(2);
    let drop = DropOracle::new(DropDescription::without_lift(a.clone())).unwrap();
    let spec = PencilOracle::new(a).unwrap();
    let mut rng = random::rng(8);
    for seed in 0..25u64 {
        let n = 1 + (seed as usize) % 3;
        let x = MatrixTuple::new((0..2).map(|_| random::sym_gaussian(&mut rng, n).scale(0.25)).collect()).unwrap();
        let c1 = decompose_free_extreme(&drop, &x, seed, &Tolerances::default()).unwrap();
        let c2 = decompose_free_extreme(&spec, &x, seed, &Tolerances::default()).unwrap();
        assert_eq!(c1.steps, c2.steps);
        assert_eq!(c1.components, c2.components);
        assert_eq!(c1.dilation, c2.dilation);
    }
}

#[test]
fn disc_origin_decomposes_into_boundary_points() {
    let (_, k) = disc();
    let cert = decompose_free_extreme(&k, &MatrixTuple::from_scalars(&[0.0]), 1, &Tolerances::default()).unwrap();
    assert!(cert.total_size <= 2);
    for c in &cert.components {
        assert_eq!(c.tuple.n(), 1);
        assert!((c.tuple[0][(0, 0)].abs() - 1.0).abs() < 1e-6);
    }
    assert!(verify_certificate(&cert).unwrap().passed);
}

#[test]
fn dilation_subspace_is_consistent_with_membership() {
    let (dd, _) = disc();
    let points = [
        MatrixTuple::from_scalars(&[0.3]),
        MatrixTuple::from_scalars(&[1.0]),
        MatrixTuple::new(vec![SymMatrix::diag(&[1.0, 0.3])]).unwrap(),
        MatrixTuple::new(vec![SymMatrix::diag(&[1.0, -1.0])]).unwrap(),
    ];
    for x in &points {
        let basis = drop_dilation_subspace(&dd, x).unwrap();
        let n = x.n();
        for j in 0..basis.cols() {
            let beta = split_beta(&basis.column(j), 1);
            assert!(dilation_scale(&dd, x, &beta, 1e-9).unwrap() > 1e-2, "{x:?}");
        }
        // Orthogonal directions only dilate within the slack allowed by the
        // feasibility tolerance, so c stays of order √tol.
        let comp = fex_core::linalg::decomp::orthonormal_complement(&basis).unwrap();
        for j in 0..comp.cols() {
            let beta = split_beta(&comp.column(j), 1);
            let c = dilation_scale(&dd, x, &beta, 1e-9).unwrap();
            assert!(c <= 10.0 * 1e-9f64.sqrt(), "{x:?}: c = {c}");
        }
        assert!(basis.cols() + comp.cols() == n);
    }
}

#[test]
fn compressions_of_members_are_psd() {
    let (dd, k) = disc();
    for (i, x) in sample_members(&k, 2, 5, 11).unwrap().iter().enumerate() {
        for m in [1, 2, 4] {
            let worst = necessary_condition_scan(&dd, x, m, 50, i as u64).unwrap();
            assert!(worst >= -1e-7, "m = {m}: {worst}");
        }
    }
}

#[test]
fn witnesses_for_non_members_are_valid() {
    let (dd, k) = disc();
    for (i, x) in sample_members(&k, 2, 6, 12).unwrap().iter().enumerate() {
        let x = x.scale(1.3 + 0.1 * i as f64);
        if drop_membership(&dd, &x, 1e-7).unwrap().inside {
            continue;
        }
        let w = dnt_violating_witness(&dd, &x).unwrap();
        assert!(w.annihilation_residual <= 1e-8);
        assert!(w.gram_violation <= -1e-4, "{}", w.gram_violation);
        assert!(w.isometry.is_valid(1e-8));
        assert!(w.compressed_violation < 0.0);
    }
}

#[test]
fn block_phi_equals_gram_form() {
    let (dd, k) = disc();
    let mut rng = random::rng(19);
    let xs = sample_members(&k, 2, 10, 13).unwrap();
    for x in &xs {
        for r in 1..=3 {
            let z = sample_v_block_matrix(&dd.b, r, &mut rng).unwrap();
            let w = factor_block_matrix(&z, dd.d(), r.max(2)).unwrap();
            let lhs = phi_block(&dd, x, z.as_matrix()).unwrap();
            let rhs = gram_test_matrix(&dd.a, &w, x).unwrap();
            let diff: Matrix = lhs.as_matrix() - rhs.as_matrix();
            assert!(diff.max_abs() <= 1e-9, "{}", diff.max_abs());
            assert!(min_eigenvalue(&lhs).unwrap() >= -1e-8);
        }
    }
}
