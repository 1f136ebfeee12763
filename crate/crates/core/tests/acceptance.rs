//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the test
//! harness so the lines always reach stdout.

use std::time::Instant;

use fex_core::extremal::{
    decompose_free_extreme, dilation_subspace_spectrahedron, ldl_chain_3x3, split_beta, three_by_three_tuple, verify_certificate,
    ConvexBodyOracle, DecompositionCertificate, PencilOracle, Tolerances, KERNEL_TOL,
};
use fex_core::generalized::{compression_boundedness, finite_interior_witness, generalized_membership, notadrop_example};
use fex_core::linalg::block::block_ldl_pivots;
use fex_core::linalg::{canonical_shuffle, min_eigenvalue, schur_complement_psd_check, sym_eigen, Matrix, SymMatrix};
use fex_core::pencil::{eval_l, Boundedness, Certainty, LinearPencil, MatrixTuple};
use fex_core::random::{self, FexRng};
use fex_core::spectrahedrop::{
    dnt_violating_witness, drop_membership, factor_block_matrix, gram_test_matrix, necessary_condition_scan, phi_block,
    sample_v_block_matrix, DropDescription, DropOracle,
};
use fex_core::FexError;
use rand::Rng;

fn contraction(rng: &mut FexRng, n: usize, lo: f64, hi: f64) -> SymMatrix {
    let s = random::sym_gaussian(rng, n);
    let rho = sym_eigen(&s).unwrap().spectral_radius();
    s.scale(rng.random_range(lo..hi) / rho)
}

fn contraction_tuple(rng: &mut FexRng, g: usize, n: usize, lo: f64, hi: f64) -> MatrixTuple {
    MatrixTuple::new((0..g).map(|_| contraction(rng, n, lo, hi)).collect()).unwrap()
}

struct Runs {
    cube: Vec<DecompositionCertificate>,
    disc: Vec<DecompositionCertificate>,
    errors: Vec<FexError>,
    seconds: f64,
}

fn standard_runs() -> Runs {
    let start = Instant::now();
    let tol = Tolerances::default();
    let cube = PencilOracle::new(LinearPencil::cube(2)).unwrap();
    let disc = DropOracle::new(DropDescription::disc()).unwrap();
    let mut rng = random::rng(2024);
    let mut runs = Runs { cube: Vec::new(), disc: Vec::new(), errors: Vec::new(), seconds: 0.0 };
    for i in 0..50u64 {
        let x = contraction_tuple(&mut rng, 2, 3, 0.2, 1.0);
        match decompose_free_extreme(&cube, &x, i, &tol) {
            Ok(c) => runs.cube.push(c),
            Err(e) => runs.errors.push(e),
        }
    }
    for i in 0..50u64 {
        let x = contraction_tuple(&mut rng, 1, 1 + (i as usize) % 3, 0.2, 1.0);
        match decompose_free_extreme(&disc, &x, i, &tol) {
            Ok(c) => runs.disc.push(c),
            Err(e) => runs.errors.push(e),
        }
    }
    runs.seconds = start.elapsed().as_secs_f64();
    runs
}

fn criterion_1(r: &Runs) -> (bool, String) {
    let mut bad = 0;
    for c in r.cube.iter().chain(&r.disc) {
        let (n, g) = (c.input.n(), c.input.g());
        let ok = c.steps.len() <= n * g
            && c.total_size <= n * (g + 1)
            && c.reconstruction_residual <= 1e-6
            && c.partition_residual <= 1e-8
            && verify_certificate(c).unwrap().passed;
        if !ok {
            bad += 1;
        }
    }
    let done = r.cube.len() + r.disc.len();
    let ok = bad == 0 && done == 100 && r.seconds < 60.0;
    (ok, format!("{done}/100 certificates, {bad} out of bounds, {:.1} s", r.seconds))
}

fn criterion_2(r: &Runs) -> (bool, String) {
    let steps: Vec<_> = r.cube.iter().chain(&r.disc).flat_map(|c| &c.steps).collect();
    let bad = steps.iter().filter(|s| s.dim_after + 1 > s.dim_before).count();
    let aborts = r.errors.iter().filter(|e| matches!(e, FexError::InvariantViolation(_))).count();
    let ok = bad == 0 && aborts == 0 && r.errors.is_empty();
    (ok, format!("{} steps, {bad} without strict decrease, {aborts} invariant aborts, {} other errors", steps.len(), r.errors.len() - aborts))
}

fn criterion_3(r: &Runs) -> (bool, String) {
    let cube = PencilOracle::new(LinearPencil::cube(2)).unwrap();
    let mut flags = 0;
    let mut worst_sym: f64 = 0.0;
    let mut count = 0;
    for c in r.cube.iter().chain(&r.disc) {
        for comp in &c.components {
            count += 1;
            if comp.dilation_dim != 0 || comp.commutant_dim != 1 {
                flags += 1;
            }
        }
    }
    for c in &r.cube {
        for comp in &c.components {
            if cube.dilation_subspace(&comp.tuple).unwrap().cols() != 0 {
                flags += 1;
            }
            for xl in comp.tuple.entries() {
                let sq = xl.as_matrix().matmul(xl.as_matrix());
                worst_sym = worst_sym.max((&sq - &Matrix::identity(comp.tuple.n())).frobenius_norm());
            }
        }
    }
    let ok = flags == 0 && worst_sym <= 1e-6 && count > 0;
    (ok, format!("{count} components, {flags} not certified, cube max‖Xₗ² − I‖_F = {worst_sym:.2e}"))
}

fn criterion_4() -> (bool, String) {
    let dd = DropDescription::disc();
    let mut rng = random::rng(44);
    // (a) compressions of members are PSD at every level tried.
    let mut worst = f64::INFINITY;
    for i in 0..20u64 {
        let x = contraction_tuple(&mut rng, 1, 1 + (i as usize) % 3, 0.3, 1.0);
        for m in [1, 3, 5] {
            worst = worst.min(necessary_condition_scan(&dd, &x, m, 50, i).unwrap());
        }
    }
    // (b) witnesses for non-members.
    let mut witnesses = 0;
    let mut worst_violation = f64::NEG_INFINITY;
    for i in 0..20usize {
        let x = contraction_tuple(&mut rng, 1, 1 + i % 3, 1.05, 2.0);
        if drop_membership(&dd, &x, 1e-7).unwrap().inside {
            continue;
        }
        if let Ok(w) = dnt_violating_witness(&dd, &x) {
            if w.annihilation_residual <= 1e-8 && w.isometry.is_valid(1e-8) && w.gram_violation <= -1e-4 {
                witnesses += 1;
            }
            worst_violation = worst_violation.max(w.gram_violation);
        }
    }
    // (c) without lift variables the drop path is the spectrahedron path.
    let a = LinearPencil::cube(2);
    let drop = DropOracle::new(DropDescription::without_lift(a.clone())).unwrap();
    let spec = PencilOracle::new(a).unwrap();
    let mut identical = 0;
    for seed in 0..25u64 {
        let x = contraction_tuple(&mut rng, 2, 1 + (seed as usize) % 3, 0.2, 1.0);
        let c1 = decompose_free_extreme(&drop, &x, seed, &Tolerances::default());
        let c2 = decompose_free_extreme(&spec, &x, seed, &Tolerances::default());
        if let (Ok(c1), Ok(c2)) = (c1, c2) {
            if c1.steps == c2.steps && c1.components == c2.components && c1.dilation == c2.dilation {
                identical += 1;
            }
        }
    }
    let ok = worst >= -1e-7 && witnesses == 20 && identical == 25;
    (
        ok,
        format!("(a) worst compressed margin {worst:.2e}; (b) {witnesses}/20 valid witnesses, weakest violation {worst_violation:.2e}; (c) {identical}/25 identical"),
    )
}

/// `L_A` at `[[X, β],[β*, γ]]`, shuffled into blocks of orders `dn` and `d`.
fn two_block_instance(rng: &mut FexRng, a: &LinearPencil) -> SymMatrix {
    let g = a.g();
    let n = rng.random_range(1..=3);
    let d = a.d();
    // Half of the points sit on the boundary, where kernel containment matters.
    let mut x = contraction_tuple(rng, g, n, 0.2, 1.0);
    if rng.random_bool(0.5) {
        let m = min_eigenvalue(&eval_l(a, &x).unwrap()).unwrap();
        x = x.scale(1.0 / (1.0 - m));
    }
    let beta = if rng.random_bool(0.5) {
        let basis = dilation_subspace_spectrahedron(a, &x, KERNEL_TOL).unwrap();
        if basis.cols() == 0 {
            vec![vec![0.0; n]; g]
        } else {
            let coef = random::unit_vector(rng, basis.cols());
            let c = rng.random_range(0.01..0.5);
            split_beta(&basis.matvec(&coef).iter().map(|v| c * v).collect::<Vec<_>>(), g)
        }
    } else {
        (0..g).map(|_| random::gaussian_vec(rng, n).iter().map(|v| 0.3 * v).collect()).collect()
    };
    let gamma: Vec<f64> = (0..g).map(|_| rng.random_range(-0.3..0.3)).collect();
    let y = x.dilate(&beta, &gamma).unwrap();
    SymMatrix::symmetrize(&canonical_shuffle(eval_l(a, &y).unwrap().as_matrix(), d, &[n, 1]).unwrap())
}

fn criterion_5() -> (bool, String) {
    let mut rng = random::rng(55);
    let a = LinearPencil::cube(2);
    let mut disagree = 0;
    let mut psd_count = 0;
    for _ in 0..200 {
        let p = two_block_instance(&mut rng, &a);
        let r_dim = p.order() - a.d();
        let diag = schur_complement_psd_check(&p, r_dim, 1e-9, 1e-9).unwrap();
        let e = sym_eigen(&p).unwrap();
        let direct = e.min() >= -1e-9 * e.spectral_radius().max(1.0);
        psd_count += direct as usize;
        if diag.psd != direct {
            disagree += 1;
        }
    }
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let g = rng.random_range(1..=2);
        let d = rng.random_range(1..=3);
        let n = rng.random_range(1..=3);
        let a = LinearPencil::new((0..g).map(|_| random::sym_gaussian(&mut rng, d)).collect()).unwrap();
        let x = MatrixTuple::new((0..g).map(|_| random::sym_gaussian(&mut rng, n).scale(0.1 / d as f64)).collect()).unwrap();
        let beta: Vec<Vec<f64>> = (0..g).map(|_| random::gaussian_vec(&mut rng, n)).collect();
        let sigma = random::gaussian_vec(&mut rng, g);
        let gamma = random::gaussian_vec(&mut rng, g);
        let c = rng.random_range(0.05..0.5);
        let chain = ldl_chain_3x3(&a, &x, &beta, c, &sigma, &gamma).unwrap();
        let y = three_by_three_tuple(&x, &beta, c, &sigma, &gamma).unwrap();
        let l = SymMatrix::symmetrize(&canonical_shuffle(eval_l(&a, &y).unwrap().as_matrix(), d, &[n, 1, 1]).unwrap());
        let piv = block_ldl_pivots(&l, &[d * n, d, d], 1e-12).unwrap();
        let scale = 1.0 + piv.iter().map(|p| p.max_abs()).fold(0.0, f64::max);
        for (mine, direct) in [&chain.l_x, &chain.middle, &chain.last].into_iter().zip(&piv) {
            worst = worst.max((mine.as_matrix() - direct.as_matrix()).max_abs() / scale);
        }
    }
    let ok = disagree == 0 && worst <= 1e-8;
    (ok, format!("2×2: {disagree}/200 disagreements ({psd_count} PSD); 3×3 chain: worst relative pivot error {worst:.2e}"))
}

fn criterion_6() -> (bool, String) {
    let mut bounded = 0;
    let mut worst_residual: f64 = 0.0;
    let mut flips = 0;
    let mut undecided = 0;
    for n in [2, 8, 32] {
        let p = notadrop_example(n).unwrap();
        if compression_boundedness(&p).unwrap().boundedness == Boundedness::Bounded {
            bounded += 1;
        }
        worst_residual = worst_residual.max(finite_interior_witness(&p).unwrap().max_residual());
        let q = p.with_order(2 * n).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let x = MatrixTuple::from_scalars(&[-3.0 + 0.6 * i as f64 + 0.05, -3.0 + 0.6 * j as f64 + 0.05]);
                let a = generalized_membership(&p, &x, 1e-9).unwrap().certainty;
                let b = generalized_membership(&q, &x, 1e-9).unwrap().certainty;
                if matches!((a, b), (Certainty::CertifiedIn, Certainty::CertifiedOut) | (Certainty::CertifiedOut, Certainty::CertifiedIn)) {
                    flips += 1;
                }
                undecided += (a == Certainty::Undecided) as usize;
            }
        }
    }
    let ok = bounded == 3 && worst_residual <= 1e-12 && flips == 0;
    (ok, format!("bounded for {bounded}/3 orders, witness residual {worst_residual:.1e}, {flips} flips over 300 grid checks ({undecided} undecided at N)"))
}

fn criterion_7() -> (bool, String) {
    let dd = DropDescription::disc();
    let mut rng = random::rng(77);
    let mut worst_diff: f64 = 0.0;
    let mut worst_eig = f64::INFINITY;
    for i in 0..30usize {
        let n = 1 + i % 3;
        let x = contraction_tuple(&mut rng, 1, n, 0.2, 1.0);
        let z = sample_v_block_matrix(&dd.b, n, &mut rng).unwrap();
        let w = factor_block_matrix(&z, dd.d(), n.max(2)).unwrap();
        let lhs = phi_block(&dd, &x, z.as_matrix()).unwrap();
        let rhs = gram_test_matrix(&dd.a, &w, &x).unwrap();
        worst_diff = worst_diff.max((lhs.as_matrix() - rhs.as_matrix()).max_abs());
        worst_eig = worst_eig.min(min_eigenvalue(&lhs).unwrap());
    }
    let ok = worst_diff <= 1e-9 && worst_eig >= -1e-8;
    (ok, format!("30 pairs, max difference {worst_diff:.2e}, min eigenvalue {worst_eig:.2e}"))
}

fn main() {
    let start = Instant::now();
    let runs = standard_runs();
    let results = [
        ("span theorem at desk scale", criterion_1(&runs)),
        ("strict decrease", criterion_2(&runs)),
        ("free extreme certification", criterion_3(&runs)),
        ("necessary condition consistency", criterion_4()),
        ("Schur and block LDL identities", criterion_5()),
        ("weighted shift example", criterion_6()),
        ("block φ identity", criterion_7()),
    ];
    let mut all = true;
    for (i, (name, (ok, detail))) in results.iter().enumerate() {
        all &= ok;
        println!("criterion {}: {} {name}: {detail}", i + 1, if *ok { "PASS" } else { "FAIL" });
    }
    println!("acceptance finished in {:.1} s", start.elapsed().as_secs_f64());
    if !all {
        std::process::exit(1);
    }
}
