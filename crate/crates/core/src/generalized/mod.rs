//! Generalized free spectrahedra `{X : I − Σ Aₗ ⊗ Xₗ ⪰ 0}` whose defining
//! tuple consists of compact self-adjoint operators on `ℓ²`, handled through
//! a finite head `ι*Aι` of order `N` and an operator-norm bound on the tail.

mod examples;

use serde::{Deserialize, Serialize};

use crate::error::{FexError, Result};
use crate::extremal::{BodyKind, BodySpec, ConvexBodyOracle, PencilOracle};
use crate::linalg::{sym_eigen, Matrix, SymMatrix};
use crate::pencil::{eval_l, Certainty, LinearPencil, MatrixTuple, MembershipVerdict, Witness};
use crate::sdp::SdpProblem;

pub use examples::{
    compression_boundedness, finite_interior_witness, ka_compress, ka_sample, notadrop_example, polar_dual_margin,
    polar_dual_spot_check, sample_members, BoundednessCertificate, FiniteInteriorWitness, PolarVerdict,
};

/// Truncation order used when none is given.
pub const DEFAULT_N: usize = 16;
/// Largest truncation order reached by automatic doubling.
pub const MAX_N: usize = 128;

/// A real sequence `s₁, s₂, …` tending to zero, indexed from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceRule {
    /// `(−1)^{i+1} / i`.
    AlternatingHarmonic,
    /// `first · ratio^{i−1}` with `|ratio| < 1`.
    Geometric { first: f64, ratio: f64 },
    /// `values[i−1]` for `i ≤ values.len()`, then `base`.
    Override { values: Vec<f64>, base: Box<SequenceRule> },
}

impl SequenceRule {
    pub fn geometric_half() -> Self {
        SequenceRule::Geometric { first: 0.5, ratio: 0.5 }
    }

    fn validate(&self) -> Result<()> {
        match self {
            SequenceRule::AlternatingHarmonic => Ok(()),
            SequenceRule::Geometric { first, ratio } => {
                if !first.is_finite() || !(ratio.abs() < 1.0) {
                    return Err(FexError::Domain("geometric rule needs a finite first term and |ratio| < 1".into()));
                }
                Ok(())
            }
            SequenceRule::Override { values, base } => {
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(FexError::Domain("override values must be finite".into()));
                }
                base.validate()
            }
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        assert!(i >= 1, "sequences are indexed from 1");
        match self {
            SequenceRule::AlternatingHarmonic => {
                let v = 1.0 / i as f64;
                if i % 2 == 1 {
                    v
                } else {
                    -v
                }
            }
            SequenceRule::Geometric { first, ratio } => first * ratio.powi(i as i32 - 1),
            SequenceRule::Override { values, base } => {
                if i <= values.len() {
                    values[i - 1]
                } else {
                    base.value(i)
                }
            }
        }
    }

    /// `sup_{i ≥ k} |sᵢ|`.
    pub fn tail_sup(&self, k: usize) -> f64 {
        let k = k.max(1);
        match self {
            SequenceRule::AlternatingHarmonic => 1.0 / k as f64,
            SequenceRule::Geometric { first, ratio } => first.abs() * ratio.abs().powi(k as i32 - 1),
            SequenceRule::Override { values, base } => {
                let head = values.iter().skip(k - 1).fold(0.0, |a: f64, v| a.max(v.abs()));
                head.max(base.tail_sup(k.max(values.len() + 1)))
            }
        }
    }
}

/// Structured compact tuples with analytic tail bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Generator {
    /// `A₁ = diag(λ)`, `A₂ = S_w + S_w*` with `S_w eᵢ = wᵢ eᵢ₊₁`.
    DiagPlusShift { lambda_rule: SequenceRule, w_rule: SequenceRule },
    /// `Aₗ = diag(λ⁽ˡ⁾)`.
    Diagonal { rules: Vec<SequenceRule> },
}

impl Generator {
    pub fn g(&self) -> usize {
        match self {
            Generator::DiagPlusShift { .. } => 2,
            Generator::Diagonal { rules } => rules.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Generator::DiagPlusShift { lambda_rule, w_rule } => {
                lambda_rule.validate()?;
                w_rule.validate()
            }
            Generator::Diagonal { rules } => {
                if rules.is_empty() {
                    return Err(FexError::Domain("diagonal generator needs at least one sequence".into()));
                }
                rules.iter().try_for_each(|r| r.validate())
            }
        }
    }

    fn head(&self, n: usize) -> Result<LinearPencil> {
        let mats = match self {
            Generator::DiagPlusShift { lambda_rule, w_rule } => {
                let a1 = SymMatrix::diag(&(1..=n).map(|i| lambda_rule.value(i)).collect::<Vec<_>>());
                let mut a2 = Matrix::zeros(n, n);
                for i in 1..n {
                    let w = w_rule.value(i);
                    a2[(i, i - 1)] = w;
                    a2[(i - 1, i)] = w;
                }
                vec![a1, SymMatrix::from_lower(a2)?]
            }
            Generator::Diagonal { rules } => {
                rules.iter().map(|r| SymMatrix::diag(&(1..=n).map(|i| r.value(i)).collect::<Vec<_>>())).collect()
            }
        };
        LinearPencil::new(mats)
    }

    /// Bound on `‖Aₗ − (ι*Aₗι ⊕ 0)‖_op` over all `ℓ` at truncation `n`.
    pub fn tail_bound(&self, n: usize) -> f64 {
        match self {
            Generator::DiagPlusShift { lambda_rule, w_rule } => {
                // Remainder is diag(λ_{N+1}, …) plus the shift part from w_N on.
                lambda_rule.tail_sup(n + 1).max(2.0 * w_rule.tail_sup(n))
            }
            Generator::Diagonal { rules } => rules.iter().fold(0.0, |a: f64, r| a.max(r.tail_sup(n + 1))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct PencilJson {
    #[serde(flatten)]
    generator: Generator,
    #[serde(rename = "N")]
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail_bound: Option<f64>,
}

/// Truncation of a compact tuple: the head `ι*Aι` of order `N` and a tail
/// bound `τ` with `‖Aₗ − (headₗ ⊕ 0)‖ ≤ τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PencilJson", into = "PencilJson")]
pub struct TruncatedCompactPencil {
    generator: Generator,
    n: usize,
    head: LinearPencil,
    tail_bound: f64,
}

impl TryFrom<PencilJson> for TruncatedCompactPencil {
    type Error = FexError;
    fn try_from(j: PencilJson) -> Result<Self> {
        TruncatedCompactPencil::new(j.generator, j.n)
    }
}

impl From<TruncatedCompactPencil> for PencilJson {
    fn from(p: TruncatedCompactPencil) -> Self {
        PencilJson { generator: p.generator, n: p.n, tail_bound: Some(p.tail_bound) }
    }
}

impl TruncatedCompactPencil {
    pub fn new(generator: Generator, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(FexError::Domain("truncation order must be positive".into()));
        }
        generator.validate()?;
        let head = generator.head(n)?;
        let tail_bound = generator.tail_bound(n);
        Ok(TruncatedCompactPencil { generator, n, head, tail_bound })
    }

    /// Same generator at another truncation order.
    pub fn with_order(&self, n: usize) -> Result<Self> {
        TruncatedCompactPencil::new(self.generator.clone(), n)
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    /// The truncation order `N`.
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn g(&self) -> usize {
        self.head.g()
    }

    pub fn head(&self) -> &LinearPencil {
        &self.head
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("generator serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// `τ · Σ‖Xₗ‖_op`, the worst effect of the tail on `L_A(X)`.
    pub fn tail_shift(&self, x: &MatrixTuple) -> Result<f64> {
        let mut s = 0.0;
        for xl in x.entries() {
            s += sym_eigen(xl)?.spectral_radius();
        }
        Ok(self.tail_bound * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surrogate {
    Lower,
    Upper,
}

/// `L_head(X) ∓ τ(Σ‖Xₗ‖)·I`. The lower surrogate being PSD (with shift at
/// most 1, for the tail block) implies `L_A(X) ⪰ 0`; `L_A(X) ⪰ 0` implies the
/// upper surrogate is PSD.
pub fn truncated_eval(p: &TruncatedCompactPencil, x: &MatrixTuple, direction: Surrogate) -> Result<SymMatrix> {
    let l = eval_l(&p.head, x)?;
    let s = p.tail_shift(x)?;
    let sign = match direction {
        Surrogate::Lower => -1.0,
        Surrogate::Upper => 1.0,
    };
    let mut out = l;
    out.add_scaled(&SymMatrix::identity(out.order()), sign * s);
    Ok(out)
}

/// Certified membership at the current truncation.
pub fn generalized_membership(p: &TruncatedCompactPencil, x: &MatrixTuple, tol: f64) -> Result<MembershipVerdict> {
    let shift = p.tail_shift(x)?;
    let lower = sym_eigen(&truncated_eval(p, x, Surrogate::Lower)?)?;
    let lower_margin = lower.min().min(1.0 - shift);
    if lower_margin >= -tol {
        return Ok(MembershipVerdict { inside: true, margin: lower_margin, certainty: Certainty::CertifiedIn, witness: None });
    }
    let upper = sym_eigen(&truncated_eval(p, x, Surrogate::Upper)?)?;
    if upper.min() <= -tol {
        let k = upper.values.len() - 1;
        return Ok(MembershipVerdict {
            inside: false,
            margin: upper.min(),
            certainty: Certainty::CertifiedOut,
            witness: Some(Witness::Eigenvector(upper.vector(k))),
        });
    }
    Ok(MembershipVerdict { inside: false, margin: lower_margin, certainty: Certainty::Undecided, witness: None })
}

/// Membership with the truncation order doubled on `Undecided` up to
/// [`MAX_N`]; returns the verdict and the truncation that produced it.
pub fn generalized_membership_refined(
    p: &TruncatedCompactPencil,
    x: &MatrixTuple,
    tol: f64,
) -> Result<(MembershipVerdict, TruncatedCompactPencil)> {
    let mut cur = p.clone();
    loop {
        let v = generalized_membership(&cur, x, tol)?;
        if v.certainty != Certainty::Undecided || cur.order() >= MAX_N {
            return Ok((v, cur));
        }
        cur = cur.with_order((cur.order() * 2).min(MAX_N))?;
    }
}

/// Dilation primitives on the head spectrahedron `D_{ι*Aι} ⊇ D_A`.
#[derive(Debug, Clone)]
pub struct GeneralizedOracle {
    pencil: TruncatedCompactPencil,
    inner: PencilOracle,
}

impl GeneralizedOracle {
    pub fn new(pencil: TruncatedCompactPencil) -> Result<Self> {
        let inner = PencilOracle::new(pencil.head().clone())?;
        Ok(GeneralizedOracle { pencil, inner })
    }

    pub fn pencil(&self) -> &TruncatedCompactPencil {
        &self.pencil
    }
}

impl ConvexBodyOracle for GeneralizedOracle {
    fn arity(&self) -> usize {
        self.inner.arity()
    }

    fn kind(&self) -> BodyKind {
        BodyKind::Generalized
    }

    fn describe(&self) -> BodySpec {
        BodySpec::Generalized { pencil: self.pencil.clone() }
    }

    fn radius(&self) -> f64 {
        self.inner.radius()
    }

    fn membership(&self, x: &MatrixTuple) -> Result<MembershipVerdict> {
        self.inner.membership(x)
    }

    fn dilation_subspace(&self, x: &MatrixTuple) -> Result<Matrix> {
        self.inner.dilation_subspace(x)
    }

    fn alpha_max(&self, x: &MatrixTuple, beta: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
        self.inner.alpha_max(x, beta)
    }

    fn gamma_problem(&self, x: &MatrixTuple, beta_hat: &[Vec<f64>]) -> Result<SdpProblem> {
        self.inner.gamma_problem(x, beta_hat)
    }

    fn gamma_margin(&self, x: &MatrixTuple, beta_hat: &[Vec<f64>], gamma: &[f64]) -> Result<f64> {
        self.inner.gamma_margin(x, beta_hat, gamma)
    }

    fn gamma_extreme(&self, x: &MatrixTuple, beta_hat: &[Vec<f64>], start: Option<&[f64]>, seed: u64) -> Result<Vec<f64>> {
        self.inner.gamma_extreme(x, beta_hat, start, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequences() {
        let a = SequenceRule::AlternatingHarmonic;
        assert_eq!(a.value(1), 1.0);
        assert_eq!(a.value(2), -0.5);
        assert_eq!(a.tail_sup(9), 1.0 / 9.0);
        let w = SequenceRule::geometric_half();
        assert_eq!(w.value(3), 0.125);
        assert_eq!(w.tail_sup(4), 1.0 / 16.0);
        let o = SequenceRule::Override { values: vec![1.0, 0.5], base: Box::new(a) };
        assert_eq!(o.value(2), 0.5);
        assert_eq!(o.value(3), 1.0 / 3.0);
        assert_eq!(o.tail_sup(1), 1.0);
        assert_eq!(o.tail_sup(3), 1.0 / 3.0);
    }

    #[test]
    fn two_by_two_head() {
        let p = notadrop_example(2).unwrap();
        assert_eq!(p.head().matrices()[0], SymMatrix::diag(&[1.0, -0.5]));
        assert_eq!(p.head().matrices()[1], SymMatrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]));
    }

    #[test]
    fn tail_bound_at_eight() {
        let p = notadrop_example(8).unwrap();
        assert!(p.tail_bound() <= (1.0f64 / 9.0).max(2.0 / 512.0) + 1e-15);
    }

    #[test]
    fn zero_is_certified_inside() {
        let p = notadrop_example(4).unwrap();
        let v = generalized_membership(&p, &MatrixTuple::zeros(2, 3), 1e-9).unwrap();
        assert_eq!(v.certainty, Certainty::CertifiedIn);
        let l = truncated_eval(&p, &MatrixTuple::zeros(2, 1), Surrogate::Upper).unwrap();
        assert_eq!(l, SymMatrix::identity(4));
    }

    #[test]
    fn far_point_is_certified_outside() {
        let p = notadrop_example(16).unwrap();
        let v = generalized_membership(&p, &MatrixTuple::from_scalars(&[2.0, 0.0]), 1e-9).unwrap();
        assert_eq!(v.certainty, Certainty::CertifiedOut);
        assert!(!v.inside);
    }

    #[test]
    fn borderline_point_needs_refinement() {
        let p4 = notadrop_example(4).unwrap();
        let x = MatrixTuple::from_scalars(&[0.92, 0.0]);
        assert_eq!(generalized_membership(&p4, &x, 1e-9).unwrap().certainty, Certainty::Undecided);
        let p16 = p4.with_order(16).unwrap();
        assert_eq!(generalized_membership(&p16, &x, 1e-9).unwrap().certainty, Certainty::CertifiedIn);
        let (v, p) = generalized_membership_refined(&p4, &x, 1e-9).unwrap();
        assert_eq!(v.certainty, Certainty::CertifiedIn);
        assert_eq!(p.order(), 16);
    }

    #[test]
    fn json_round_trip() {
        let p = notadrop_example(8).unwrap();
        let s = p.to_json();
        assert!(s.contains("\"type\":\"diag_plus_shift\""));
        assert!(s.contains("\"N\":8"));
        assert_eq!(TruncatedCompactPencil::from_json(&s).unwrap(), p);
        let q = TruncatedCompactPencil::from_json(
            r#"{"type":"diag_plus_shift","lambda_rule":"alternating_harmonic","w_rule":{"geometric":{"first":0.5,"ratio":0.5}},"N":8}"#,
        )
        .unwrap();
        assert_eq!(q, p);
    }

    #[test]
    fn bad_rules_are_rejected() {
        let g = Generator::DiagPlusShift {
            lambda_rule: SequenceRule::AlternatingHarmonic,
            w_rule: SequenceRule::Geometric { first: 1.0, ratio: 1.5 },
        };
        assert!(matches!(TruncatedCompactPencil::new(g, 4), Err(FexError::Domain(_))));
    }
}
