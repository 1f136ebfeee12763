//! Free spectrahedrops `proj_x D_{(A,B)}`: lifted membership, the drop
//! dilation subspace, the isometry machinery of the DNT membership test and
//! the [`ConvexBodyOracle`] implementation.

mod dnt;

use serde::{Deserialize, Serialize};

use crate::error::{FexError, Result};
use crate::extremal::{BodyKind, BodySpec, ConvexBodyOracle, PencilOracle, KERNEL_TOL, THIN_TOL};
use crate::linalg::decomp::{nullspace, orthonormal_complement, range_basis};
use crate::linalg::{kron_sym, norm, symmetric_basis, Matrix, SymMatrix};
use crate::pencil::{eval_l, membership, recession_test, Boundedness, LinearPencil, MatrixTuple, MembershipVerdict, Witness, FEAS_TOL};
use crate::sdp::{feasible_point, reduce_face, solve, LmiBlock, SdpProblem, SdpSettings, SdpStatus};

pub use dnt::{
    compress_pencil, dnt_violating_witness, factor_block_matrix, gram_test_matrix, necessary_condition_scan, phi_block,
    phi_map, sample_isometry, sample_v_block_matrix, DntWitness, IsometryWitness,
};

/// Default box on lift variables for the free functions.
const DEFAULT_LIFT_BOUND: f64 = 1e3;

/// Feasibility tolerance of lifted solves. Corners produced by one dilation
/// step sit on the boundary up to solver accuracy (about `1e-8`), and the
/// next step must still accept them.
pub const LIFT_FEAS_TOL: f64 = 1e-7;

/// Seed of the generic objectives used when selecting a corner in `alpha_max`.
const CORNER_SEED: u64 = 0x00C0_FFEE;

fn lift_settings() -> SdpSettings {
    SdpSettings { feas_tol: LIFT_FEAS_TOL, ..SdpSettings::default() }
}

/// The pair `(A, B)` defining `{X : ∃Y, L_A(X) − Λ_B(Y) ⪰ 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropDescription {
    #[serde(rename = "A")]
    pub a: LinearPencil,
    #[serde(rename = "B")]
    pub b: LinearPencil,
}

impl DropDescription {
    pub fn new(a: LinearPencil, b: LinearPencil) -> Result<Self> {
        if a.d() != b.d() {
            return Err(FexError::Shape(format!("A has order {}, B has order {}", a.d(), b.d())));
        }
        Ok(DropDescription { a, b })
    }

    /// `A = (diag(1, −1))`, `B = ([[0, 1], [1, 0]])`: level one is the unit
    /// disc projected to `[−1, 1]`, and the drop is `{‖X‖ ≤ 1}`.
    pub fn disc() -> Self {
        let b = LinearPencil::new(vec![SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]])]).expect("valid");
        DropDescription { a: LinearPencil::interval(), b }
    }

    /// A drop with no lift variables.
    pub fn without_lift(a: LinearPencil) -> Self {
        let b = LinearPencil::with_order(a.d(), Vec::new()).expect("valid");
        DropDescription { a, b }
    }

    pub fn g(&self) -> usize {
        self.a.g()
    }

    pub fn h(&self) -> usize {
        self.b.g()
    }

    pub fn d(&self) -> usize {
        self.a.d()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("drop serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let dd: DropDescription = serde_json::from_str(s)?;
        DropDescription::new(dd.a, dd.b)
    }

    /// Randomized boundedness test of the `x`-projection of the joint pencil.
    pub fn is_bounded(&self, trials: usize, seed: u64) -> Result<Boundedness> {
        let mats: Vec<SymMatrix> = self.a.matrices().iter().chain(self.b.matrices()).cloned().collect();
        recession_test(&mats, self.g(), trials, seed)
    }
}

/// LMI of order `d·N` built as `F₀ − Σ_v Σ (C ⊗ U)` over variables `v`.
struct LiftBuilder {
    f0: SymMatrix,
    terms: Vec<SymMatrix>,
}

impl LiftBuilder {
    fn new(a: &LinearPencil, x: &MatrixTuple) -> Result<Self> {
        Ok(LiftBuilder { f0: eval_l(a, x)?, terms: Vec::new() })
    }

    fn var(&mut self, parts: &[(&SymMatrix, SymMatrix)]) -> usize {
        let mut t = SymMatrix::zeros(self.f0.order());
        for (c, u) in parts {
            t.add_scaled(&kron_sym(c, u), -1.0);
        }
        self.terms.push(t);
        self.terms.len() - 1
    }

    /// Variables for `Y ∈ SM_N^h` entering through `B`.
    fn lift_vars(&mut self, b: &LinearPencil, order: usize, pad: usize) {
        for bj in b.matrices() {
            for e in symmetric_basis(order) {
                let u = pad_sym(&e, pad);
                self.var(&[(bj, u)]);
            }
        }
    }

    fn problem(self, objective: Option<Vec<f64>>, bound: f64) -> SdpProblem {
        let dim = self.terms.len();
        let mut block = LmiBlock::new(self.f0);
        for (i, t) in self.terms.into_iter().enumerate() {
            block.push_term(i, t);
        }
        let mut p = SdpProblem::new(dim).with_bound(bound);
        if let Some(c) = objective {
            p = p.with_objective(c);
        }
        p.add_block(block);
        p
    }
}

fn pad_sym(m: &SymMatrix, pad: usize) -> SymMatrix {
    let n = m.order();
    let mut out = Matrix::zeros(n + pad, n + pad);
    out.set_block(0, 0, m);
    SymMatrix::symmetrize(&out)
}

fn unit_sym(order: usize, i: usize, j: usize) -> SymMatrix {
    let mut m = Matrix::zeros(order, order);
    m[(i, j)] = 1.0;
    m[(j, i)] = 1.0;
    if i == j {
        m[(i, i)] = 1.0;
    }
    SymMatrix::symmetrize(&m)
}

/// The lift LMI `L_A(X) − Λ_B(Y) ⪰ 0` in the coordinates of `Y`.
fn lift_problem(dd: &DropDescription, x: &MatrixTuple, bound: f64) -> Result<SdpProblem> {
    let mut lb = LiftBuilder::new(&dd.a, x)?;
    lb.lift_vars(&dd.b, x.n(), 0);
    Ok(lb.problem(None, bound))
}

fn lift_tuple(dd: &DropDescription, n: usize, y: &[f64]) -> Result<MatrixTuple> {
    let basis = symmetric_basis(n);
    let s = basis.len();
    let entries = (0..dd.h())
        .map(|j| {
            let mut m = SymMatrix::zeros(n);
            for (e, b) in basis.iter().enumerate() {
                m.add_scaled(b, y[j * s + e]);
            }
            m
        })
        .collect();
    MatrixTuple::with_order(n, entries)
}

fn lifted_membership(dd: &DropDescription, x: &MatrixTuple, tol: f64, bound: f64) -> Result<MembershipVerdict> {
    if x.g() != dd.g() {
        return Err(FexError::Shape(format!("drop has g = {}, tuple has g = {}", dd.g(), x.g())));
    }
    if dd.h() == 0 {
        return membership(&dd.a, x, tol);
    }
    let mut lb = LiftBuilder::new(&dd.a, x)?;
    lb.lift_vars(&dd.b, x.n(), 0);
    // Far-away tuples make the phase-one problem badly scaled; the sign of
    // the margin is invariant under a positive rescaling of the LMI.
    let s = lb.f0.max_abs().max(1.0);
    lb.f0 = lb.f0.scale(1.0 / s);
    for t in &mut lb.terms {
        *t = t.scale(1.0 / s);
    }
    let p = lb.problem(None, bound);
    let r = feasible_point(&p, &SdpSettings { feas_tol: LIFT_FEAS_TOL / s, ..SdpSettings::default() })?;
    if r.status == SdpStatus::NumericalFailure {
        return Err(FexError::NumericalFailure("lifted membership solve failed".into()));
    }
    let margin = r.margin * s;
    let inside = margin >= -tol;
    let witness = if inside { Witness::Lift(lift_tuple(dd, x.n(), &r.y)?) } else { Witness::Dual(r.dual[0].clone()) };
    Ok(MembershipVerdict::from_margin(margin, tol, Some(witness)))
}

/// Membership in the drop: `∃Y` with `L_{(A,B)}(X, Y) ⪰ −tol·I`, decided by
/// a phase-one SDP over `Y` (dual certificate attached when outside).
pub fn drop_membership(dd: &DropDescription, x: &MatrixTuple, tol: f64) -> Result<MembershipVerdict> {
    lifted_membership(dd, x, tol, DEFAULT_LIFT_BOUND)
}

fn drop_subspace_with(dd: &DropDescription, x: &MatrixTuple, bound: f64) -> Result<Matrix> {
    let n = x.n();
    let gn = dd.g() * n;
    if dd.h() == 0 {
        return crate::extremal::dilation_subspace_spectrahedron(&dd.a, x, KERNEL_TOL);
    }
    let p = lift_problem(dd, x, bound)?;
    let fr = reduce_face(&p, &lift_settings(), THIN_TOL)?;
    if !fr.feasible {
        return Err(FexError::NotMember { margin: fr.reduced_margin });
    }
    // Kernel of L(X, Y) at a relative-interior lift: the exposed directions.
    let k = orthonormal_complement(&fr.ranges[0])?;
    if k.cols() == 0 {
        return Ok(Matrix::identity(gn));
    }
    let map = crate::extremal::containment_map(&dd.a, n, &k).hcat(&crate::extremal::containment_map(&dd.b, n, &k));
    let ns = nullspace(&map, 1e-6)?;
    if ns.cols() == 0 {
        return Ok(Matrix::zeros(gn, 0));
    }
    range_basis(&ns.submatrix(0, 0, gn, ns.cols()), 1e-6)
}

/// `{β : [[X, cβ],[cβ*, 0]] ∈ proj_x D_{(A,B)} for some c > 0}`, from the
/// kernel of the lifted evaluation at a relative-interior lift `Y`:
/// `β` qualifies iff `Λ_A(β*)K + Λ_B(η*)K = 0` for some `η`.
pub fn drop_dilation_subspace(dd: &DropDescription, x: &MatrixTuple) -> Result<Matrix> {
    drop_subspace_with(dd, x, DEFAULT_LIFT_BOUND)
}

/// Largest `c ∈ [1e-8, 1e4]` (by bisection) with `[[X, cβ],[cβ*, 0]]` in
/// the drop; `0` when even `c = 1e-8` fails.
pub fn dilation_scale(dd: &DropDescription, x: &MatrixTuple, beta: &[Vec<f64>], tol: f64) -> Result<f64> {
    let zero = vec![0.0; dd.g()];
    let inside = |c: f64| -> Result<bool> {
        let bc: Vec<Vec<f64>> = beta.iter().map(|b| b.iter().map(|v| c * v).collect()).collect();
        Ok(drop_membership(dd, &x.dilate(&bc, &zero)?, tol)?.inside)
    };
    let (mut lo, mut hi) = (1e-8, 1e4);
    if !inside(lo)? {
        return Ok(0.0);
    }
    if inside(hi)? {
        return Ok(hi);
    }
    // Geometric bisection: the interval spans twelve decades.
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if inside(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-6 {
            break;
        }
    }
    Ok(lo)
}

/// Oracle for a bounded spectrahedrop. With `h = 0` every call is forwarded
/// to the spectrahedron oracle of `A`.
#[derive(Debug, Clone)]
pub struct DropOracle {
    drop: DropDescription,
    inner: Option<PencilOracle>,
    radius: f64,
    lift_bound: f64,
    tol: f64,
}

impl DropOracle {
    pub fn new(drop: DropDescription) -> Result<Self> {
        if drop.h() == 0 {
            let inner = PencilOracle::new(drop.a.clone())?;
            let radius = inner.radius();
            return Ok(DropOracle { drop, inner: Some(inner), radius, lift_bound: DEFAULT_LIFT_BOUND, tol: FEAS_TOL });
        }
        let (g, h) = (drop.g(), drop.h());
        let mats: Vec<&SymMatrix> = drop.a.matrices().iter().chain(drop.b.matrices()).collect();
        let coord_max = |k: usize, sign: f64| -> Result<f64> {
            let mut block = LmiBlock::new(SymMatrix::identity(drop.d()));
            for (i, m) in mats.iter().enumerate() {
                block.push_term(i, m.scale(-1.0));
            }
            let mut c = vec![0.0; g + h];
            c[k] = sign;
            let mut p = SdpProblem::new(g + h).with_objective(c).with_bound(1e4);
            p.add_block(block);
            let r = solve(&p, &SdpSettings::default())?;
            if r.status != SdpStatus::Optimal {
                return Err(FexError::NumericalFailure("radius estimate failed".into()));
            }
            Ok(r.value.abs())
        };
        let mut radius: f64 = 0.0;
        let mut lift: f64 = 0.0;
        for k in 0..g + h {
            let v = coord_max(k, 1.0)?.max(coord_max(k, -1.0)?);
            if k < g {
                radius = radius.max(v);
            } else {
                lift = lift.max(v);
            }
        }
        if radius > 1e3 {
            return Err(FexError::Precondition("spectrahedrop is unbounded (level-one radius exceeds 1e3)".into()));
        }
        let lift_bound = if lift > 1e3 { 1e4 } else { 10.0 * lift.max(radius).max(1.0) };
        Ok(DropOracle { drop, inner: None, radius, lift_bound, tol: LIFT_FEAS_TOL })
    }

    pub fn description(&self) -> &DropDescription {
        &self.drop
    }

    /// Lift LMI of a 1-dilation of `x` with corner variables.
    fn dilation_lmi(&self, x: &MatrixTuple, beta: &[Vec<f64>], alpha_var: bool) -> Result<LiftBuilder> {
        let n = x.n();
        let g = self.drop.g();
        let big = n + 1;
        let fixed_beta: Vec<Vec<f64>> = if alpha_var { vec![vec![0.0; n]; g] } else { beta.to_vec() };
        let base = x.dilate(&fixed_beta, &vec![0.0; g])?;
        let mut lb = LiftBuilder::new(&self.drop.a, &base)?;
        if alpha_var {
            let parts: Vec<(&SymMatrix, SymMatrix)> = self
                .drop
                .a
                .matrices()
                .iter()
                .zip(beta)
                .map(|(al, b)| {
                    let mut u = Matrix::zeros(big, big);
                    for i in 0..n {
                        u[(i, n)] = b[i];
                        u[(n, i)] = b[i];
                    }
                    (al, SymMatrix::symmetrize(&u))
                })
                .collect();
            lb.var(&parts);
        }
        for al in self.drop.a.matrices() {
            lb.var(&[(al, unit_sym(big, n, n))]);
        }
        for bj in self.drop.b.matrices() {
            lb.var(&[(bj, unit_sym(big, n, n))]);
        }
        lb.lift_vars(&self.drop.b, n, 1);
        for bj in self.drop.b.matrices() {
            for i in 0..n {
                lb.var(&[(bj, unit_sym(big, i, n))]);
            }
        }
        Ok(lb)
    }
}

impl ConvexBodyOracle for DropOracle {
    fn arity(&self) -> usize {
        self.drop.g()
    }

    fn kind(&self) -> BodyKind {
        BodyKind::Spectrahedrop
    }

    fn describe(&self) -> BodySpec {
        BodySpec::Spectrahedrop { drop: self.drop.clone() }
    }

    fn radius(&self) -> f64 {
        self.radius
    }

    fn membership(&self, x: &MatrixTuple) -> Result<MembershipVerdict> {
        lifted_membership(&self.drop, x, self.tol, self.lift_bound)
    }

    fn dilation_subspace(&self, x: &MatrixTuple) -> Result<Matrix> {
        match &self.inner {
            Some(k) => k.dilation_subspace(x),
            None => drop_subspace_with(&self.drop, x, self.lift_bound),
        }
    }

    fn alpha_max(&self, x: &MatrixTuple, beta: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
        if let Some(k) = &self.inner {
            return k.alpha_max(x, beta);
        }
        let nb = norm(&crate::extremal::flatten_beta(beta));
        if nb == 0.0 {
            return Err(FexError::NoDilation);
        }
        let g = self.drop.g();
        let lb = self.dilation_lmi(x, beta, true)?;
        let bound = self.lift_bound.max(10.0 * self.radius.max(1.0) * (g as f64).sqrt() / nb);
        let p = lb.problem(None, bound);
        // Maximize α, then walk to an extreme corner inside the optimal
        // slice of the same LMI; solving for γ separately at the rounded α
        // would meet an empty or spurious slice.
        let mut first = vec![0.0; 1 + g];
        first[0] = 1.0;
        let z = crate::extremal::lexicographic_extreme(1 + g, &p, Some(&first), &lift_settings(), CORNER_SEED)
            .map_err(|e| match e {
                FexError::NumericalFailure(m) if m.contains("empty") => FexError::NotMember { margin: f64::NAN },
                other => other,
            })?;
        if z[0] <= 1e-10 {
            return Err(FexError::NoDilation);
        }
        Ok((z[0], z[1..].to_vec()))
    }

    fn gamma_problem(&self, x: &MatrixTuple, beta_hat: &[Vec<f64>]) -> Result<SdpProblem> {
        if let Some(k) = &self.inner {
            return k.gamma_problem(x, beta_hat);
        }
        Ok(self.dilation_lmi(x, beta_hat, false)?.problem(None, self.lift_bound))
    }

    fn gamma_margin(&self, x: &MatrixTuple, beta_hat: &[Vec<f64>], gamma: &[f64]) -> Result<f64> {
        match &self.inner {
            Some(k) => k.gamma_margin(x, beta_hat, gamma),
            None => Ok(self.membership(&x.dilate(beta_hat, gamma)?)?.margin),
        }
    }

    fn gamma_extreme(&self, x: &MatrixTuple, beta_hat: &[Vec<f64>], start: Option<&[f64]>, seed: u64) -> Result<Vec<f64>> {
        match &self.inner {
            Some(k) => k.gamma_extreme(x, beta_hat, start, seed),
            // The corner returned by `alpha_max` is already extreme in its slice.
            None => match start {
                Some(g0) => Ok(g0.to_vec()),
                None => crate::extremal::lexicographic_extreme(
                    self.drop.g(),
                    &self.gamma_problem(x, beta_hat)?,
                    None,
                    &lift_settings(),
                    seed,
                ),
            },
        }
    }
}
