use fex_core::linalg::{min_eigenvalue, Matrix, SymMatrix};
use fex_core::sdp::{feasible_point, solve, LmiBlock, SdpProblem, SdpSettings, SdpStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            m[(i, j)] = rng.random_range(-1.0..1.0);
        }
    }
    SymMatrix::from_lower(m).unwrap()
}

fn random_problem(rng: &mut ChaCha8Rng, f0: SymMatrix) -> SdpProblem {
    let n = f0.order();
    let dim = rng.random_range(1..5);
    let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut block = LmiBlock::new(f0);
    for i in 0..dim {
        block.push_term(i, random_sym(rng, n));
    }
    let mut p = SdpProblem::new(dim).with_objective(c).with_bound(100.0);
    p.add_block(block);
    p
}

#[test]
fn weak_duality_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let settings = SdpSettings::default();
    for _ in 0..40 {
        let n = rng.random_range(2..6);
        let p = random_problem(&mut rng, SymMatrix::identity(n));
        let r = solve(&p, &settings).unwrap();
        assert_eq!(r.status, SdpStatus::Optimal);
        assert!(r.margin >= -settings.feas_tol, "margin {}", r.margin);
        assert!(r.dual_bound >= r.value - 1e-6);
        assert!((r.dual_bound - r.value).abs() <= 1e-6 * (1.0 + r.value.abs()), "gap {} vs {}", r.dual_bound, r.value);
    }
}

#[test]
fn infeasibility_certificates_verify() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let settings = SdpSettings::default();
    let mut seen = 0;
    for _ in 0..40 {
        let n = rng.random_range(2..5);
        // F(y) = -I + Σ yᵢ Fᵢ with traceless Fᵢ has trace -n: always infeasible.
        let mut block = LmiBlock::new(SymMatrix::identity(n).scale(-1.0));
        let dim = rng.random_range(1..4);
        for i in 0..dim {
            let mut f = random_sym(&mut rng, n);
            let tr = f.trace() / n as f64;
            f.add_scaled(&SymMatrix::identity(n), -tr);
            block.push_term(i, f);
        }
        let mut p = SdpProblem::new(dim).with_bound(100.0);
        p.add_block(block);
        let r = feasible_point(&p, &settings).unwrap();
        assert_eq!(r.status, SdpStatus::Infeasible);
        let (f0, fi) = r.dual_residuals(&p);
        assert!(min_eigenvalue(&r.dual[0]).unwrap() >= -1e-12);
        assert!(f0 < -settings.feas_tol && fi <= 1e-7, "f0 {f0} fi {fi}");
        seen += 1;
    }
    assert_eq!(seen, 40);
}

#[test]
fn repeated_solves_are_bitwise_equal() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let p = random_problem(&mut rng, SymMatrix::identity(4));
    let a = solve(&p, &SdpSettings::default()).unwrap();
    let b = solve(&p, &SdpSettings::default()).unwrap();
    assert_eq!(a.y, b.y);
    assert_eq!(a.dual, b.dual);
}

#[test]
fn zero_point_is_feasible_for_identity_block() {
    let mut p = SdpProblem::new(2).with_bound(10.0);
    p.add_block(
        LmiBlock::new(SymMatrix::identity(2))
            .with_term(0, SymMatrix::diag(&[-1.0, 1.0]))
            .with_term(1, SymMatrix::from_rows(&[vec![0.0, -1.0], vec![-1.0, 0.0]])),
    );
    let r = feasible_point(&p, &SdpSettings::default()).unwrap();
    assert_eq!(r.status, SdpStatus::Optimal);
    assert!(r.margin >= 0.0);
}
