use serde::{Deserialize, Serialize};

use crate::error::{FexError, Result};
use crate::extremal::ConvexBodyOracle;
use crate::linalg::{sym_eigen, Matrix, SymMatrix};
use crate::pencil::{eval_l, is_bounded, Boundedness, Certainty, LinearPencil, MatrixTuple};
use crate::random;
use rand::Rng;

use super::{Generator, SequenceRule, TruncatedCompactPencil};

/// Diagonal `λᵢ = (−1)^{i+1}/i` plus the symmetrized weighted shift with
/// `wᵢ = 2^{−i}`, truncated at order `N ≥ 2`.
pub fn notadrop_example(n: usize) -> Result<TruncatedCompactPencil> {
    if n < 2 {
        return Err(FexError::Domain("the example needs truncation order at least 2".into()));
    }
    TruncatedCompactPencil::new(
        Generator::DiagPlusShift { lambda_rule: SequenceRule::AlternatingHarmonic, w_rule: SequenceRule::geometric_half() },
        n,
    )
}

/// Leading `λ₁, λ₂, w₁` of a diagonal-plus-shift generator, checked against
/// `λ₁ > 0 > λ₂`.
fn leading_terms(p: &TruncatedCompactPencil) -> Result<(f64, f64, f64)> {
    let Generator::DiagPlusShift { lambda_rule, w_rule } = p.generator() else {
        return Err(FexError::Domain("needs a diagonal-plus-shift generator".into()));
    };
    if p.order() < 2 {
        return Err(FexError::Domain("needs truncation order at least 2".into()));
    }
    let (l1, l2, w1) = (lambda_rule.value(1), lambda_rule.value(2), w_rule.value(1));
    if !(l1 > 0.0 && l2 < 0.0) {
        return Err(FexError::Domain(format!("needs λ₁ > 0 > λ₂, got λ₁ = {l1}, λ₂ = {l2}")));
    }
    Ok((l1, l2, w1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessCertificate {
    /// The compression `(diag(λ₁, λ₂), [[0, w₁], [w₁, 0]])` to the first two
    /// coordinates; `D_A ⊆ D_{ι*Aι}`.
    pub compressed: LinearPencil,
    pub boundedness: Boundedness,
    /// `min_θ λmax(cos θ·A₁' + sin θ·A₂')` over a 3600-point grid; positive
    /// means no combination is negative semidefinite.
    pub min_top_eigenvalue: f64,
}

/// Boundedness of `D_A` through its two-dimensional compression.
pub fn compression_boundedness(p: &TruncatedCompactPencil) -> Result<BoundednessCertificate> {
    let (l1, l2, w1) = leading_terms(p)?;
    if w1 == 0.0 {
        return Err(FexError::Domain("needs w₁ ≠ 0".into()));
    }
    let a1 = SymMatrix::diag(&[l1, l2]);
    let a2 = SymMatrix::from_rows(&[vec![0.0, w1], vec![w1, 0.0]]);
    let compressed = LinearPencil::new(vec![a1.clone(), a2.clone()])?;
    let mut min_top = f64::INFINITY;
    for k in 0..3600 {
        let t = k as f64 * std::f64::consts::TAU / 3600.0;
        let mut m = a1.scale(t.cos());
        m.add_scaled(&a2, t.sin());
        min_top = min_top.min(sym_eigen(&m)?.max());
    }
    let boundedness = is_bounded(&compressed, 8, 0x5EED)?;
    Ok(BoundednessCertificate { compressed, boundedness, min_top_eigenvalue: min_top })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteInteriorWitness {
    pub d: usize,
    /// Vectors in `ℝᴺ` (zero past the second coordinate).
    pub vectors: Vec<Vec<f64>>,
    /// `Σⱼ vⱼ*(headₗ)vⱼ` per coordinate `ℓ`.
    pub residuals: Vec<f64>,
}

impl FiniteInteriorWitness {
    /// The quadratic-form sums of these vectors against another truncation.
    pub fn residuals_for(&self, p: &TruncatedCompactPencil) -> Result<Vec<f64>> {
        quadratic_sums(p, &self.vectors)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |a: f64, r| a.max(r.abs()))
    }
}

fn quadratic_sums(p: &TruncatedCompactPencil, vectors: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = p.order();
    if vectors.iter().any(|v| v.len() != n) {
        return Err(FexError::Shape(format!("witness vectors must have length {n}")));
    }
    Ok(p.head()
        .matrices()
        .iter()
        .map(|a| vectors.iter().map(|v| crate::linalg::dot(v, &a.matvec(v))).sum())
        .collect())
}

/// `v₁ = (√(−λ₂), 0)`, `v₂ = (0, √λ₁)`: `Σ vⱼ*(ι*Aₗι)vⱼ = 0` for both `ℓ`,
/// so `0` is in the finite interior of `K_A`.
pub fn finite_interior_witness(p: &TruncatedCompactPencil) -> Result<FiniteInteriorWitness> {
    let (l1, l2, _) = leading_terms(p)?;
    let n = p.order();
    let mut v1 = vec![0.0; n];
    let mut v2 = vec![0.0; n];
    v1[0] = (-l2).sqrt();
    v2[1] = l1.sqrt();
    let vectors = vec![v1, v2];
    let residuals = quadratic_sums(p, &vectors)?;
    Ok(FiniteInteriorWitness { d: 2, vectors, residuals })
}

/// `V*(I_copies ⊗ headₗ)V` for an isometry `V` with `copies·N` rows.
pub fn ka_compress(p: &TruncatedCompactPencil, v: &Matrix) -> Result<MatrixTuple> {
    let n = p.order();
    if v.rows() == 0 || v.rows() % n != 0 {
        return Err(FexError::Shape(format!("isometry rows {} are not a multiple of N = {n}", v.rows())));
    }
    let copies = v.rows() / n;
    let entries = p
        .head()
        .matrices()
        .iter()
        .map(|a| {
            let mut big = Matrix::zeros(copies * n, copies * n);
            for c in 0..copies {
                big.set_block(c * n, c * n, a.as_matrix());
            }
            SymMatrix::symmetrize(&big.congruence(v))
        })
        .collect();
    MatrixTuple::new(entries)
}

/// Random element of `K_A` at level `n`: a compression of a direct sum of
/// copies of the head by a random isometry (at most 8 copies).
pub fn ka_sample(p: &TruncatedCompactPencil, n: usize, seed: u64) -> Result<MatrixTuple> {
    let order = p.order();
    let copies = n.div_ceil(order).max(2);
    if n == 0 || copies > 8 {
        return Err(FexError::Shape(format!("level {n} needs 1 ≤ n ≤ 8·N")));
    }
    let mut rng = random::rng(seed);
    let q = random::orthogonal(&mut rng, copies * order);
    let idx: Vec<usize> = (0..n).collect();
    ka_compress(p, &crate::linalg::decomp::select_columns(&q, &idx))
}

/// Members of `K` at level `n`: random directions scaled to a random point
/// of the segment from 0 to the boundary (half of them on the boundary).
pub fn sample_members<K: ConvexBodyOracle + ?Sized>(k: &K, n: usize, count: usize, seed: u64) -> Result<Vec<MatrixTuple>> {
    let mut rng = random::rng(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let dir = MatrixTuple::new((0..k.arity()).map(|_| random::sym_gaussian(&mut rng, n)).collect())?;
        let top = dir.entries().iter().map(|m| sym_eigen(m).map(|e| e.spectral_radius())).collect::<Result<Vec<_>>>()?;
        let top = top.into_iter().fold(0.0, f64::max);
        if top == 0.0 {
            continue;
        }
        let (mut lo, mut hi) = (0.0, 1.01 * k.radius() / top);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if k.membership(&dir.scale(mid))?.inside {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let u: f64 = if rng.random_bool(0.5) { 1.0 } else { rng.random_range(0.0..1.0) };
        out.push(dir.scale(u * lo));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarVerdict {
    /// `CertifiedOut` when some sample violates; `Undecided` otherwise
    /// (sampling cannot certify membership in the polar dual).
    pub certainty: Certainty,
    pub worst_margin: Option<f64>,
    pub samples: usize,
}

/// Worst `λmin L_X(A)` over the samples; `L_X(A)` is a shuffle of `L_A(X)`.
pub fn polar_dual_margin(candidate: &LinearPencil, samples: &[MatrixTuple], tol: f64) -> Result<PolarVerdict> {
    let mut worst: Option<f64> = None;
    for x in samples {
        let m = sym_eigen(&eval_l(candidate, x)?)?.min();
        worst = Some(worst.map_or(m, |w| w.min(m)));
    }
    let certainty = match worst {
        Some(w) if w < -tol => Certainty::CertifiedOut,
        _ => Certainty::Undecided,
    };
    Ok(PolarVerdict { certainty, worst_margin: worst, samples: samples.len() })
}

/// Necessary-condition check of `A ∈ K°` on sampled members of `K` at level
/// `n`.
pub fn polar_dual_spot_check<K: ConvexBodyOracle + ?Sized>(
    k: &K,
    candidate: &LinearPencil,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<PolarVerdict> {
    let xs = sample_members(k, n, samples, seed)?;
    polar_dual_margin(candidate, &xs, 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extremal::PencilOracle;

    #[test]
    fn boundedness_of_the_example() {
        for n in [2, 8, 32] {
            let c = compression_boundedness(&notadrop_example(n).unwrap()).unwrap();
            assert_eq!(c.boundedness, Boundedness::Bounded);
            assert!(c.min_top_eigenvalue > 0.0);
        }
    }

    #[test]
    fn hypotheses_are_enforced() {
        let flipped = TruncatedCompactPencil::new(
            Generator::DiagPlusShift {
                lambda_rule: SequenceRule::Override { values: vec![1.0, 0.5], base: Box::new(SequenceRule::AlternatingHarmonic) },
                w_rule: SequenceRule::geometric_half(),
            },
            4,
        )
        .unwrap();
        assert!(matches!(compression_boundedness(&flipped), Err(FexError::Domain(_))));
        let no_shift = TruncatedCompactPencil::new(
            Generator::DiagPlusShift {
                lambda_rule: SequenceRule::AlternatingHarmonic,
                w_rule: SequenceRule::Geometric { first: 0.0, ratio: 0.5 },
            },
            4,
        )
        .unwrap();
        assert!(matches!(compression_boundedness(&no_shift), Err(FexError::Domain(_))));
    }

    #[test]
    fn flipped_compression_has_a_recession_direction() {
        // With λ₂ > 0 the direction (−1, 0) gives −diag(λ₁, λ₂) ⪯ 0.
        let a = LinearPencil::new(vec![SymMatrix::diag(&[1.0, 0.5]), SymMatrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]])]).unwrap();
        assert!(matches!(is_bounded(&a, 8, 1).unwrap(), Boundedness::UnboundedWitness(_)));
    }

    #[test]
    fn interior_witness_vanishes() {
        let w = finite_interior_witness(&notadrop_example(2).unwrap()).unwrap();
        assert!((w.vectors[0][0] - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(w.vectors[1][1], 1.0);
        assert!(w.max_residual() <= 1e-12);
        let scaled: Vec<Vec<f64>> = w.vectors.iter().map(|v| v.iter().map(|x| 3.0 * x).collect()).collect();
        let r = quadratic_sums(&notadrop_example(2).unwrap(), &scaled).unwrap();
        assert!(r.iter().all(|v| v.abs() <= 9e-12));
    }

    #[test]
    fn perturbed_lambda_breaks_the_witness() {
        let w = finite_interior_witness(&notadrop_example(2).unwrap()).unwrap();
        let perturbed = TruncatedCompactPencil::new(
            Generator::DiagPlusShift {
                lambda_rule: SequenceRule::Override { values: vec![1.0, -0.6], base: Box::new(SequenceRule::AlternatingHarmonic) },
                w_rule: SequenceRule::geometric_half(),
            },
            2,
        )
        .unwrap();
        let r = w.residuals_for(&perturbed).unwrap();
        assert!((r[0] + 0.1).abs() < 1e-12);
    }

    #[test]
    fn ka_identity_compression_is_the_head() {
        let p = notadrop_example(5).unwrap();
        let y = ka_compress(&p, &Matrix::identity(5)).unwrap();
        assert_eq!(y.entries(), p.head().matrices());
    }

    #[test]
    fn ka_samples_lie_in_the_polar_of_the_head_spectrahedron() {
        let p = notadrop_example(6).unwrap();
        let k = PencilOracle::new(p.head().clone()).unwrap();
        let xs = sample_members(&k, 2, 10, 3).unwrap();
        for seed in [1, 2] {
            let y = ka_sample(&p, 4, seed).unwrap();
            let cand = LinearPencil::new(y.entries().to_vec()).unwrap();
            let v = polar_dual_margin(&cand, &xs, 1e-9).unwrap();
            assert!(v.worst_margin.unwrap() >= -1e-8, "{:?}", v);
        }
        assert_ne!(ka_sample(&p, 4, 1).unwrap(), ka_sample(&p, 4, 2).unwrap());
    }

    #[test]
    fn polar_spot_checks() {
        let k = PencilOracle::new(LinearPencil::cube(2)).unwrap();
        // Σ‖Aₗ‖ ≤ 1/r puts A in the polar dual.
        let r = k.radius();
        let small = LinearPencil::new(vec![SymMatrix::diag(&[0.4 / r, -0.3 / r]), SymMatrix::from_rows(&[vec![0.0, 0.5 / r], vec![0.5 / r, 0.0]])]).unwrap();
        let v = polar_dual_spot_check(&k, &small, 2, 20, 4).unwrap();
        assert!(v.worst_margin.unwrap() >= 0.0);
        assert_eq!(v.certainty, Certainty::Undecided);
        let big = LinearPencil::new(vec![SymMatrix::diag(&[5.0, -5.0]), SymMatrix::diag(&[5.0, 5.0])]).unwrap();
        let v = polar_dual_spot_check(&k, &big, 2, 20, 4).unwrap();
        assert_eq!(v.certainty, Certainty::CertifiedOut);
        let v = polar_dual_margin(&big, &[], 1e-9).unwrap();
        assert_eq!(v.certainty, Certainty::Undecided);
        assert!(v.worst_margin.is_none());
    }
}
