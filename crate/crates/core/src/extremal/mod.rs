//! The dilation engine.
//!
//! Everything here is written against [`ConvexBodyOracle`], so free
//! spectrahedra, spectrahedrops and truncated generalized spectrahedra share
//! one implementation of maximal 1-dilations, the Arveson iteration, the
//! irreducible splitting and the decomposition certificate.
//!
//! A point `β` of the dilation subspace is stored as `g` vectors of length
//! `n`; subspace bases are `(g·n) × k` matrices whose rows are indexed by
//! `ℓ·n + i`.

mod certificate;
mod chain;
mod commutant;
mod spectrahedron;

use serde::{Deserialize, Serialize};

use crate::error::{FexError, Result};
use crate::linalg::decomp::svd;
use crate::linalg::{norm, Matrix};
use crate::pencil::{MatrixTuple, MembershipVerdict};
use crate::random;
use crate::sdp::{reduce_face, restrict_affine, solve, SdpProblem, SdpSettings, SdpStatus};

pub use certificate::{
    decompose_free_extreme, oracle_for, verify_certificate, BodySpec, CheckOutcome, ComponentRecord,
    DecompositionCertificate, Tolerances, VerifyReport,
};
pub use chain::{ldl_chain_3x3, three_by_three_tuple, ChainPivots};
pub use commutant::{irreducible_decomposition, symmetric_commutant, Component};
pub use spectrahedron::{dilation_subspace_spectrahedron, PencilOracle};
pub(crate) use spectrahedron::containment_map;

/// Relative kernel tolerance used for every Arveson decision.
pub const KERNEL_TOL: f64 = 1e-9;
/// Phase-one value below which a lifted set is treated as having no interior.
pub const THIN_TOL: f64 = 1e-7;
/// Perturbation size of the extremality check on `Γ`.
pub const EXTREME_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyKind {
    Spectrahedron,
    Spectrahedrop,
    Generalized,
}

/// Membership and dilation primitives of a closed bounded matrix convex set.
pub trait ConvexBodyOracle {
    fn arity(&self) -> usize;

    fn kind(&self) -> BodyKind;

    /// Serializable description, embedded in certificates.
    fn describe(&self) -> BodySpec;

    /// Bound on the operator norm of every entry of every member.
    fn radius(&self) -> f64;

    fn membership(&self, x: &MatrixTuple) -> Result<MembershipVerdict>;

    /// Orthonormal basis (`(g·n) × k`) of the dilation subspace at `x`.
    fn dilation_subspace(&self, x: &MatrixTuple) -> Result<Matrix>;

    /// `max{α : ∃γ, [[X, αβ],[αβ*, γ]] ∈ K}` together with a feasible corner.
    fn alpha_max(&self, x: &MatrixTuple, beta: &[Vec<f64>]) -> Result<(f64, Vec<f64>)>;

    /// An LMI whose feasible set projects onto `Γ_{X,β̂}` through its first
    /// `g` variables.
    fn gamma_problem(&self, x: &MatrixTuple, beta_hat: &[Vec<f64>]) -> Result<SdpProblem>;

    /// Minimum-eigenvalue style margin of the corner `γ` (nonnegative iff
    /// `γ ∈ Γ_{X,β̂}` up to solver accuracy).
    fn gamma_margin(&self, x: &MatrixTuple, beta_hat: &[Vec<f64>], gamma: &[f64]) -> Result<f64> {
        Ok(self.membership(&x.dilate(beta_hat, gamma)?)?.margin)
    }

    /// Maximizer of `⟨c, γ⟩` over `Γ_{X,β̂}`.
    fn gamma_set_maximize(&self, x: &MatrixTuple, beta_hat: &[Vec<f64>], c: &[f64]) -> Result<Vec<f64>> {
        let p = self.gamma_problem(x, beta_hat)?;
        let settings = SdpSettings::default();
        let fr = reduce_face(&p, &settings, THIN_TOL)?;
        if !fr.feasible {
            return Err(FexError::NumericalFailure("corner set is empty".into()));
        }
        let mut full = vec![0.0; p.dim];
        full[..c.len()].copy_from_slice(c);
        let q = fr.reduced_problem(&SdpProblem { objective: full, ..p });
        let r = solve(&q, &settings)?;
        if r.status != SdpStatus::Optimal {
            return Err(FexError::NumericalFailure("corner maximization failed".into()));
        }
        Ok(fr.point(&r.y)[..self.arity()].to_vec())
    }

    /// An extreme point of `Γ_{X,β̂}`; `start` is a known member if any.
    fn gamma_extreme(&self, x: &MatrixTuple, beta_hat: &[Vec<f64>], start: Option<&[f64]>, seed: u64) -> Result<Vec<f64>> {
        let _ = start;
        lexicographic_extreme(self.arity(), &self.gamma_problem(x, beta_hat)?, None, &SdpSettings::default(), seed)
    }
}

/// Extreme point of the projection onto the first `g` variables of
/// `{z : F(z) ⪰ 0}`: maximize a generic functional, fix the optimal value,
/// reduce to the new face, repeat until the projection is a point. A
/// `first` objective (over the first `g` variables) is used before the
/// random ones.
pub fn lexicographic_extreme(
    g: usize,
    p: &SdpProblem,
    first: Option<&[f64]>,
    settings: &SdpSettings,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = random::rng(seed);
    let mut q = p.clone();
    q.objective = vec![0.0; q.dim];
    let mut off = vec![0.0; p.dim];
    let mut lin = Matrix::identity(p.dim);
    for round in 0..=g + 2 {
        let fr = reduce_face(&q, settings, THIN_TOL)?;
        if !fr.feasible {
            return Err(FexError::NumericalFailure("corner set is empty".into()));
        }
        let shift = lin.matvec(&fr.z0);
        for (a, b) in off.iter_mut().zip(shift) {
            *a += b;
        }
        lin = lin.matmul(&fr.basis);
        q = fr.reduced_problem(&q);
        let lin_g = lin.submatrix(0, 0, g, lin.cols());
        let spread = if lin_g.cols() == 0 { 0.0 } else { svd(&lin_g)?.max() };
        if spread <= 1e-9 {
            let w = if lin.cols() == 0 { Vec::new() } else { fr.w_interior.clone() };
            let z = add(&off, &lin.matvec(&w));
            return Ok(z[..g].to_vec());
        }
        let c = match first {
            Some(f) if round == 0 => f.to_vec(),
            _ => random::unit_vector(&mut rng, g),
        };
        q.objective = lin_g.transpose().matvec(&c);
        let r = solve(&q, settings)?;
        if r.status != SdpStatus::Optimal {
            return Err(FexError::NumericalFailure("lexicographic step failed".into()));
        }
        // Fix ⟨c, γ⟩ at its optimum.
        let row = Matrix::from_rows(&[q.objective.clone()]);
        let n2 = crate::linalg::nullspace(&row, 1e-12)?;
        let shift = lin.matvec(&r.y);
        for (a, b) in off.iter_mut().zip(shift) {
            *a += b;
        }
        lin = lin.matmul(&n2);
        q = restrict_affine(&q, &r.y, &n2);
        q.objective = vec![0.0; q.dim];
    }
    Err(FexError::NumericalFailure("lexicographic iteration did not reach a point".into()))
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Splits a flat `(g·n)` vector into `g` vectors of length `n`.
pub fn split_beta(flat: &[f64], g: usize) -> Vec<Vec<f64>> {
    let n = flat.len() / g.max(1);
    (0..g).map(|l| flat[l * n..(l + 1) * n].to_vec()).collect()
}

pub fn flatten_beta(beta: &[Vec<f64>]) -> Vec<f64> {
    beta.iter().flatten().copied().collect()
}

/// `γ̂` for a maximal 1-dilation, verified extreme by perturbation: for 20
/// random unit `σ`, not both `γ̂ ± εσ` lie in `Γ_{X,β̂}`.
pub fn gamma_extreme_point<K: ConvexBodyOracle + ?Sized>(k: &K, x: &MatrixTuple, beta_hat: &[Vec<f64>], seed: u64) -> Result<Vec<f64>> {
    let gamma = k.gamma_extreme(x, beta_hat, None, seed)?;
    let mut rng = random::rng(random::sub_seed(seed, 77));
    let inside_tol = 1e-10;
    for _ in 0..20 {
        let s = random::unit_vector(&mut rng, gamma.len());
        let plus: Vec<f64> = gamma.iter().zip(&s).map(|(a, b)| a + EXTREME_EPS * b).collect();
        let minus: Vec<f64> = gamma.iter().zip(&s).map(|(a, b)| a - EXTREME_EPS * b).collect();
        if k.gamma_margin(x, beta_hat, &plus)? >= -inside_tol && k.gamma_margin(x, beta_hat, &minus)? >= -inside_tol {
            return Err(FexError::NumericalFailure("corner is not an extreme point of its set".into()));
        }
    }
    Ok(gamma)
}

/// One maximal 1-dilation `[[X, β̂],[β̂*, γ̂]]` and its bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilationStep {
    /// Order of the tuple being dilated.
    pub order: usize,
    pub beta_hat: Vec<Vec<f64>>,
    pub gamma_hat: Vec<f64>,
    /// Scale applied to the unit direction `β`.
    pub alpha: f64,
    pub dim_before: usize,
    pub dim_after: usize,
    pub seed: u64,
}

/// A maximal 1-dilation of `x`. Retries with a fresh direction (at most 3
/// times) when the dilation subspace fails to shrink.
pub fn maximal_one_dilation<K: ConvexBodyOracle + ?Sized>(k: &K, x: &MatrixTuple, seed: u64) -> Result<(DilationStep, MatrixTuple)> {
    let verdict = k.membership(x)?;
    if !verdict.inside {
        return Err(FexError::NotMember { margin: verdict.margin });
    }
    let basis = k.dilation_subspace(x)?;
    let dim_before = basis.cols();
    if dim_before == 0 {
        return Err(FexError::AlreadyArveson);
    }
    let g = k.arity();
    let mut last = 0;
    for attempt in 0..4u64 {
        let s = random::sub_seed(seed, attempt);
        let mut rng = random::rng(s);
        let coef = random::unit_vector(&mut rng, dim_before);
        let flat = basis.matvec(&coef);
        let beta = split_beta(&flat, g);
        let (alpha, gamma0) = k.alpha_max(x, &beta)?;
        let beta_hat: Vec<Vec<f64>> = beta.iter().map(|b| b.iter().map(|v| alpha * v).collect()).collect();
        let gamma_hat = k.gamma_extreme(x, &beta_hat, Some(&gamma0), s)?;
        let y = x.dilate(&beta_hat, &gamma_hat)?;
        let vy = k.membership(&y)?;
        if vy.margin < -1e-7 {
            return Err(FexError::InvariantViolation(format!("dilation left the set (margin {:.3e})", vy.margin)));
        }
        let dim_after = k.dilation_subspace(&y)?.cols();
        if dim_after < dim_before {
            let step = DilationStep { order: x.n(), beta_hat, gamma_hat, alpha, dim_before, dim_after, seed: s };
            return Ok((step, y));
        }
        last = dim_after;
    }
    Err(FexError::InvariantViolation(format!("dilation subspace did not shrink ({dim_before} -> {last})")))
}

/// Iterates maximal 1-dilations until the dilation subspace vanishes.
pub fn arveson_dilate<K: ConvexBodyOracle + ?Sized>(k: &K, x: &MatrixTuple, seed: u64) -> Result<(MatrixTuple, Vec<DilationStep>)> {
    let cap = x.n() * k.arity();
    let mut y = x.clone();
    let mut steps: Vec<DilationStep> = Vec::new();
    loop {
        match maximal_one_dilation(k, &y, random::sub_seed(seed, 1000 + steps.len() as u64)) {
            Ok((step, next)) => {
                if let Some(prev) = steps.last() {
                    if step.dim_before > prev.dim_after {
                        return Err(FexError::InvariantViolation("dilation subspace grew between steps".into()));
                    }
                }
                steps.push(step);
                y = next;
                if steps.len() > cap {
                    return Err(FexError::InvariantViolation(format!("more than n·g = {cap} dilation steps")));
                }
            }
            Err(FexError::AlreadyArveson) => return Ok((y, steps)),
            Err(e) => return Err(e),
        }
    }
}

pub(crate) fn beta_norm(beta: &[Vec<f64>]) -> f64 {
    norm(&flatten_beta(beta))
}
