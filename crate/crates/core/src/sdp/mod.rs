//! Small dense semidefinite programs in inequality form:
//! maximize `cᵀy` subject to `F₀ + Σ yᵢFᵢ ⪰ 0` blockwise.

mod facial;
mod ipm;

use serde::{Deserialize, Serialize};

use crate::error::{FexError, Result};
use crate::linalg::{min_eigenvalue, SymMatrix};

pub use facial::{reduce_face, restrict_affine, FaceReduction};

/// One affine block `F₀ + Σ yᵢFᵢ ⪰ 0`; only nonzero `Fᵢ` are listed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LmiBlock {
    pub f0: SymMatrix,
    pub terms: Vec<(usize, SymMatrix)>,
}

impl LmiBlock {
    pub fn new(f0: SymMatrix) -> Self {
        LmiBlock { f0, terms: Vec::new() }
    }

    pub fn with_term(mut self, var: usize, f: SymMatrix) -> Self {
        self.push_term(var, f);
        self
    }

    pub fn push_term(&mut self, var: usize, f: SymMatrix) {
        assert_eq!(f.order(), self.f0.order(), "block term order mismatch");
        if f.max_abs() > 0.0 {
            self.terms.push((var, f));
        }
    }

    pub fn order(&self) -> usize {
        self.f0.order()
    }

    pub fn eval(&self, y: &[f64]) -> SymMatrix {
        let mut out = self.f0.clone();
        for (i, f) in &self.terms {
            if y[*i] != 0.0 {
                out.add_scaled(f, y[*i]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpProblem {
    pub dim: usize,
    pub objective: Vec<f64>,
    pub blocks: Vec<LmiBlock>,
    /// Box `|yᵢ| ≤ bound` added to regularize the solve.
    pub bound: Option<f64>,
}

impl SdpProblem {
    pub fn new(dim: usize) -> Self {
        SdpProblem { dim, objective: vec![0.0; dim], blocks: Vec::new(), bound: None }
    }

    pub fn with_objective(mut self, c: Vec<f64>) -> Self {
        assert_eq!(c.len(), self.dim);
        self.objective = c;
        self
    }

    pub fn with_bound(mut self, r: f64) -> Self {
        self.bound = Some(r);
        self
    }

    pub fn add_block(&mut self, block: LmiBlock) {
        self.blocks.push(block);
    }

    fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(FexError::Shape("SDP needs at least one block".into()));
        }
        if self.objective.len() != self.dim {
            return Err(FexError::Shape("objective length differs from variable count".into()));
        }
        for b in &self.blocks {
            for (i, f) in &b.terms {
                if *i >= self.dim || f.order() != b.order() {
                    return Err(FexError::Shape(format!("bad term for variable {i}")));
                }
            }
        }
        Ok(())
    }

    /// Smallest eigenvalue over all blocks at `y` (`+inf` with only empty blocks).
    pub fn margin(&self, y: &[f64]) -> Result<f64> {
        let mut worst = f64::INFINITY;
        for b in &self.blocks {
            worst = worst.min(min_eigenvalue(&b.eval(y))?);
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpResult {
    pub status: SdpStatus,
    pub y: Vec<f64>,
    pub value: f64,
    /// Dual matrix per block. For `Infeasible` it is normalized to unit total
    /// trace and satisfies `⟨Z,F₀⟩ < 0`, `⟨Z,Fᵢ⟩ ≈ 0`.
    pub dual: Vec<SymMatrix>,
    /// `⟨F₀, Z⟩` (plus box terms), an upper bound on the optimal value.
    pub dual_bound: f64,
    /// Minimum eigenvalue over the blocks at `y`.
    pub margin: f64,
    pub iterations: usize,
}

impl SdpResult {
    /// `⟨Z, F₀⟩` and `max |⟨Z, Fᵢ⟩|` over the user blocks.
    pub fn dual_residuals(&self, p: &SdpProblem) -> (f64, f64) {
        let f0: f64 = p.blocks.iter().zip(&self.dual).map(|(b, z)| b.f0.dot(z)).sum();
        let mut fi = vec![0.0; p.dim];
        for (b, z) in p.blocks.iter().zip(&self.dual) {
            for (i, f) in &b.terms {
                fi[*i] += f.dot(z);
            }
        }
        (f0, fi.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SdpSettings {
    pub feas_tol: f64,
    /// Target relative duality gap and residual norms.
    pub gap_tol: f64,
    pub max_iter: usize,
    /// Box used when the problem has none.
    pub default_bound: f64,
}

impl Default for SdpSettings {
    fn default() -> Self {
        SdpSettings { feas_tol: 1e-8, gap_tol: 1e-12, max_iter: 120, default_bound: 1e4 }
    }
}

/// Maximize the objective. Infeasibility is decided by a phase-one problem
/// and reported with its dual certificate.
pub fn solve(p: &SdpProblem, settings: &SdpSettings) -> Result<SdpResult> {
    p.validate()?;
    let phase1 = max_margin(p, settings)?;
    if phase1.status != SdpStatus::Optimal {
        return Ok(phase1);
    }
    if phase1.margin < -settings.feas_tol {
        return Ok(SdpResult { status: SdpStatus::Infeasible, ..phase1 });
    }
    // Relax slightly when there is (numerically) no interior, so the
    // returned point still meets the feasibility tolerance.
    let t = phase1.value;
    let shift = if t >= settings.feas_tol { 0.0 } else { 0.5 * (settings.feas_tol - t) };
    let relaxed;
    let target = if shift > 0.0 {
        let mut q = p.clone();
        for b in &mut q.blocks {
            let n = b.order();
            b.f0.add_scaled(&SymMatrix::identity(n), shift);
        }
        relaxed = q;
        &relaxed
    } else {
        p
    };
    let mut out = ipm::solve_problem(target, settings, None)?;
    if out.status == SdpStatus::Optimal || out.status == SdpStatus::NumericalFailure {
        out.margin = p.margin(&out.y)?;
        if out.margin < -settings.feas_tol {
            // Fall back to the phase-one point if the optimizer drifted.
            if out.status == SdpStatus::NumericalFailure {
                return Ok(SdpResult { status: SdpStatus::NumericalFailure, ..phase1 });
            }
        }
    }
    Ok(out)
}

/// A point maximizing the minimum eigenvalue over the blocks (within the
/// box), or `Infeasible` with a dual certificate.
pub fn feasible_point(p: &SdpProblem, settings: &SdpSettings) -> Result<SdpResult> {
    p.validate()?;
    let r = max_margin(p, settings)?;
    if r.status == SdpStatus::Optimal && r.margin < -settings.feas_tol {
        return Ok(SdpResult { status: SdpStatus::Infeasible, ..r });
    }
    Ok(r)
}

/// Phase one: maximize `t` with `F(y) − tI ⪰ 0`, `t ≤ 1`. `value` is `t*`,
/// `margin` is the true minimum eigenvalue at `y`, `dual` the normalized
/// certificate.
fn max_margin(p: &SdpProblem, settings: &SdpSettings) -> Result<SdpResult> {
    let m = p.dim;
    let mut q = SdpProblem::new(m + 1);
    q.objective[m] = 1.0;
    q.bound = p.bound;
    for b in &p.blocks {
        let mut nb = b.clone();
        nb.push_term(m, SymMatrix::identity(b.order()).scale(-1.0));
        q.add_block(nb);
    }
    q.add_block(LmiBlock::new(SymMatrix::identity(1)).with_term(m, SymMatrix::identity(1).scale(-1.0)));
    let t0 = p.margin(&vec![0.0; m])?;
    let mut start = vec![0.0; m + 1];
    start[m] = if t0.is_finite() { t0.min(1.0) - 1.0 } else { 0.0 };
    let res = ipm::solve_problem(&q, settings, Some(&start))?;
    let y = res.y[..m].to_vec();
    let margin = p.margin(&y)?;
    let mut dual: Vec<SymMatrix> = res.dual[..p.blocks.len()].to_vec();
    let tr: f64 = dual.iter().map(|z| z.trace()).sum();
    if tr > 0.0 {
        for z in &mut dual {
            *z = z.scale(1.0 / tr);
        }
    }
    let dual_bound = p.blocks.iter().zip(&dual).map(|(b, z)| b.f0.dot(z)).sum();
    Ok(SdpResult {
        status: res.status,
        y,
        value: res.y[m],
        dual,
        dual_bound,
        margin,
        iterations: res.iterations,
    })
}
