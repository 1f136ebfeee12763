//! Isometries annihilating `B`, compressed pencils and the φ-map.
//!
//! A map `W: ℝ^r → (ℝ^d)^{md}` is stored as an `(m·d·d) × r` matrix whose
//! `k`-th `d × r` row block is `W_k`; then `W*(B^{⊕md})W = Σ W_kᵀ B W_k`.
//! PSD block matrices `Z = (Z_pq)` with `Z_pq ∈ M_d` are indexed `p·d + a`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FexError, Result};
use crate::linalg::block::commutation_shuffle;
use crate::linalg::decomp::{nullspace, range_basis};
use crate::linalg::{min_eigenvalue, sym_eigen, symmetric_basis, Matrix, SymMatrix};
use crate::pencil::{eval_l, LinearPencil, MatrixTuple, Witness, FEAS_TOL};
use crate::random::{self, FexRng};
use crate::sdp::{feasible_point, restrict_affine, LmiBlock, SdpProblem, SdpSettings, SdpStatus};

use super::{drop_membership, DropDescription};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsometryWitness {
    pub w: Matrix,
    pub m: usize,
    pub r: usize,
    /// `‖W*W − I_r‖_F`.
    pub isometry_residual: f64,
    /// `max_j ‖W*(B_j^{⊕md})W‖_F`.
    pub annihilation_residual: f64,
}

impl IsometryWitness {
    pub fn from_matrix(b: &LinearPencil, w: Matrix, m: usize) -> Result<Self> {
        let d = b.d();
        if w.rows() != m * d * d {
            return Err(FexError::Shape(format!("W needs {} rows, has {}", m * d * d, w.rows())));
        }
        let r = w.cols();
        let isometry_residual = (&w.tr_matmul(&w) - &Matrix::identity(r)).frobenius_norm();
        let annihilation_residual =
            b.matrices().iter().map(|bj| block_compress(&w, bj).frobenius_norm()).fold(0.0, f64::max);
        Ok(IsometryWitness { w, m, r, isometry_residual, annihilation_residual })
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.isometry_residual <= tol && self.annihilation_residual <= tol
    }
}

/// `Σ_k W_kᵀ C W_k` for `d × d` blocks `C`.
fn block_compress(w: &Matrix, c: &Matrix) -> Matrix {
    let d = c.rows();
    let r = w.cols();
    let mut out = Matrix::zeros(r, r);
    for k in 0..w.rows() / d {
        let wk = w.submatrix(k * d, 0, d, r);
        out.add_scaled(&wk.tr_matmul(&c.matmul(&wk)), 1.0);
    }
    out
}

/// `W*(Aₗ^{⊕md})W` for every `ℓ`.
pub fn compress_pencil(a: &LinearPencil, w: &IsometryWitness) -> Result<LinearPencil> {
    if w.w.rows() % (a.d() * a.d()) != 0 || w.w.rows() / (a.d() * a.d()) != w.m {
        return Err(FexError::Shape("isometry does not match the pencil order".into()));
    }
    if w.r == 0 {
        return Err(FexError::Shape("compression to r = 0 has no pencil".into()));
    }
    let mats = a.matrices().iter().map(|al| SymMatrix::symmetrize(&block_compress(&w.w, al))).collect();
    LinearPencil::with_order(w.r, mats)
}

/// Orthonormal basis (as vectorized `d × d` matrices) of `span(mats)`.
fn span_basis(mats: &[&Matrix], d: usize) -> Result<Matrix> {
    let cols: Vec<Vec<f64>> = mats.iter().map(|m| m.data().to_vec()).collect();
    range_basis(&Matrix::from_columns(d * d, &cols), 1e-12)
}

/// Removes from the symmetric part of `m` its component in `span(q)`.
fn project_sym_off(m: &Matrix, q: &Matrix) -> Matrix {
    let d = m.rows();
    let s = SymMatrix::symmetrize(m).into_matrix();
    let mut out = m.clone();
    for c in 0..q.cols() {
        let qc = q.column(c);
        let coef: f64 = s.data().iter().zip(&qc).map(|(a, b)| a * b).sum();
        let qm = Matrix::from_vec(d, d, qc).expect("sized");
        out.add_scaled(&qm, -coef);
    }
    out
}

/// Applies `project_sym_off` to every `d × d` block of an `rd × rd` matrix.
fn project_blocks(z: &Matrix, d: usize, q: &Matrix) -> SymMatrix {
    let r = z.rows() / d;
    let mut out = Matrix::zeros(z.rows(), z.cols());
    for p in 0..r {
        for s in 0..r {
            out.set_block(p * d, s * d, &project_sym_off(&z.submatrix(p * d, s * d, d, d), q));
        }
    }
    SymMatrix::symmetrize(&out)
}

/// A positive definite `P ∈ V = span(B)^⊥` with `tr P = 1`.
pub(crate) fn v_interior_point(b: &LinearPencil) -> Result<SymMatrix> {
    let d = b.d();
    let bs: Vec<&Matrix> = b.matrices().iter().map(|m| m.as_matrix()).collect();
    let q = span_basis(&bs, d)?;
    let p0 = SymMatrix::symmetrize(&project_sym_off(&Matrix::identity(d), &q));
    let t = p0.trace();
    if t <= 1e-12 {
        return Err(FexError::Domain("identity lies in span(B); the drop is unbounded".into()));
    }
    let p0 = p0.scale(1.0 / t);
    if min_eigenvalue(&p0)? > 1e-9 {
        return Ok(p0);
    }
    // Maximize λmin over {P ∈ V, tr P = 1}.
    let basis = symmetric_basis(d);
    let mut cons: Vec<Vec<f64>> = b.matrices().iter().map(|bj| basis.iter().map(|e| e.dot(bj)).collect()).collect();
    cons.push(basis.iter().map(|e| e.trace()).collect());
    let dirs = nullspace(&Matrix::from_rows(&cons), 1e-12)?;
    let mut block = LmiBlock::new(SymMatrix::zeros(d));
    for (e, be) in basis.iter().enumerate() {
        block.push_term(e, be.clone());
    }
    let mut full = SdpProblem::new(basis.len()).with_bound(10.0);
    full.add_block(block);
    let z0: Vec<f64> = basis.iter().map(|e| e.dot(&p0)).collect();
    let p = restrict_affine(&full, &z0, &dirs);
    let r = feasible_point(&p, &SdpSettings::default())?;
    if r.status != SdpStatus::Optimal || r.margin <= 1e-9 {
        return Err(FexError::Domain("span(B)^⊥ contains no positive definite matrix".into()));
    }
    let mut out = p0;
    for (e, v) in dirs.matvec(&r.y).into_iter().enumerate() {
        out.add_scaled(&basis[e], v);
    }
    Ok(out)
}

/// Random PSD `Z ∈ M_r(V)` with `tr Z_pq = δ_pq`, positive definite.
pub fn sample_v_block_matrix(b: &LinearPencil, r: usize, rng: &mut FexRng) -> Result<SymMatrix> {
    let d = b.d();
    let p0 = v_interior_point(b)?;
    let mut z = SymMatrix::symmetrize(&crate::linalg::kron(&Matrix::identity(r), &p0));
    let id = Matrix::identity(d);
    let mut mats: Vec<&Matrix> = b.matrices().iter().map(|m| m.as_matrix()).collect();
    mats.push(&id);
    let q = span_basis(&mats, d)?;
    for _ in 0..3 {
        let h = project_blocks(random::sym_gaussian(rng, r * d).as_matrix(), d, &q);
        let e = sym_eigen(&z)?;
        let inv_half = e.apply_fn(|v| 1.0 / v.max(1e-300).sqrt());
        let he = sym_eigen(&h.congruence(inv_half.as_matrix()))?;
        // Step length: a random fraction of the distance to the PSD boundary.
        let frac: f64 = rng.random_range(0.3..0.95);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let reach = if sign > 0.0 { -he.min() } else { he.max() };
        if reach <= 1e-12 {
            continue;
        }
        z.add_scaled(&h, sign * frac / reach);
    }
    Ok(z)
}

/// Factors a PSD block matrix `Z` (order `r·d`) as `W*W`-compatible blocks:
/// `W_k[a, p] = z_k[p·d + a]` with `Z = Σ z_k z_kᵀ`, padded to `m·d` blocks.
pub fn factor_block_matrix(z: &SymMatrix, d: usize, m: usize) -> Result<Matrix> {
    let r = z.order() / d;
    let e = sym_eigen(z)?;
    let cut = 1e-14 * e.spectral_radius().max(1e-300);
    let factors: Vec<Vec<f64>> =
        (0..z.order()).filter(|&k| e.values[k] > cut).map(|k| e.vector(k).iter().map(|v| v * e.values[k].sqrt()).collect()).collect();
    if factors.len() > m * d {
        return Err(FexError::Shape(format!("rank {} exceeds the {} available blocks", factors.len(), m * d)));
    }
    let mut w = Matrix::zeros(m * d * d, r);
    for (k, zk) in factors.iter().enumerate() {
        for p in 0..r {
            for a in 0..d {
                w[(k * d + a, p)] = zk[p * d + a];
            }
        }
    }
    Ok(w)
}

/// Random element of `I_B(m, r)` from a random trace-normalized PSD block
/// matrix with blocks in `V`. Needs `1 ≤ r ≤ m`.
pub fn sample_isometry(b: &LinearPencil, m: usize, r: usize, rng: &mut FexRng) -> Result<IsometryWitness> {
    if r == 0 || r > m {
        return Err(FexError::Shape(format!("need 1 ≤ r ≤ m, got r = {r}, m = {m}")));
    }
    let z = sample_v_block_matrix(b, r, rng)?;
    let w = factor_block_matrix(&z, b.d(), m)?;
    let iw = IsometryWitness::from_matrix(b, w, m)?;
    if !iw.is_valid(1e-8) {
        return Err(FexError::NumericalFailure(format!(
            "sampled isometry residuals {:.2e}, {:.2e}",
            iw.isometry_residual, iw.annihilation_residual
        )));
    }
    Ok(iw)
}

/// Worst `λmin L_{W*(A^{⊕md})W}(X)` over `samples` random `W ∈ I_B(m, m)`.
/// With no lift variables it is the margin of `L_A(X)`.
pub fn necessary_condition_scan(dd: &DropDescription, x: &MatrixTuple, m: usize, samples: usize, seed: u64) -> Result<f64> {
    if dd.h() == 0 {
        return min_eigenvalue(&eval_l(&dd.a, x)?);
    }
    let mut rng = random::rng(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let w = sample_isometry(&dd.b, m, m, &mut rng)?;
        let c = compress_pencil(&dd.a, &w)?;
        worst = worst.min(min_eigenvalue(&eval_l(&c, x)?)?);
    }
    Ok(worst)
}

/// `W*W ⊗ I_n − Λ_{W*(A^{⊕})W}(X)`, indexed `p·n + i`.
pub fn gram_test_matrix(a: &LinearPencil, w: &Matrix, x: &MatrixTuple) -> Result<SymMatrix> {
    let d = a.d();
    if w.rows() % (d * d) != 0 {
        return Err(FexError::Shape("W rows must be a multiple of d²".into()));
    }
    let n = x.n();
    let r = w.cols();
    let gram = w.tr_matmul(w);
    let mut e = crate::linalg::kron(&gram, &Matrix::identity(n));
    for (al, xl) in a.matrices().iter().zip(x.entries()) {
        e.add_scaled(&crate::linalg::kron(&block_compress(w, al), xl), -1.0);
    }
    debug_assert_eq!(e.rows(), r * n);
    Ok(SymMatrix::symmetrize(&e))
}

/// A map `W ∈ Z_B(n)` exposing non-membership, together with the isometry
/// `V ∈ I_B(n, r)` obtained by whitening `W*W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DntWitness {
    /// `‖W‖_F = 1`, `W*(B^{⊕nd})W = 0`.
    pub w: Matrix,
    pub annihilation_residual: f64,
    /// `λmin(W*W ⊗ I − Λ_{W*AW}(X))`.
    pub gram_violation: f64,
    pub isometry: IsometryWitness,
    /// `λmin L_{V*AV}(X)`.
    pub compressed_violation: f64,
}

/// Builds `W ∈ Z_B(n)` from the dual certificate of the lifted membership
/// problem: shuffle `Z` to blocks indexed by `ℝⁿ`, project the blocks onto
/// `V`, restore PSD with a multiple of `I_n ⊗ P`, then factor.
pub fn dnt_violating_witness(dd: &DropDescription, x: &MatrixTuple) -> Result<DntWitness> {
    let verdict = drop_membership(dd, x, FEAS_TOL)?;
    if verdict.inside {
        return Err(FexError::Precondition("tuple is a member; no violating witness exists".into()));
    }
    let (d, n) = (dd.d(), x.n());
    let z = match (dd.h(), verdict.witness) {
        (0, _) => {
            let e = sym_eigen(&eval_l(&dd.a, x)?)?;
            let v = e.vector(e.values.len() - 1);
            SymMatrix::symmetrize(&Matrix::column_vector(&v).matmul(&Matrix::from_rows(&[v.clone()])))
        }
        (_, Some(Witness::Dual(z))) => z,
        _ => return Err(FexError::NumericalFailure("lifted solve returned no dual certificate".into())),
    };
    // Index a·n + i → i·d + a.
    let zs = commutation_shuffle(z.as_matrix(), d, n)?;
    let bs: Vec<&Matrix> = dd.b.matrices().iter().map(|m| m.as_matrix()).collect();
    let q = span_basis(&bs, d)?;
    let mut zv = project_blocks(&zs, d, &q);
    let low = min_eigenvalue(&zv)?;
    if low < 0.0 {
        let p = v_interior_point(&dd.b)?;
        let s = -low / min_eigenvalue(&p)? * (1.0 + 1e-9);
        zv.add_scaled(&SymMatrix::symmetrize(&crate::linalg::kron(&Matrix::identity(n), &p)), s);
    }
    let mut w = factor_block_matrix(&zv, d, n)?;
    let nw = w.frobenius_norm();
    if nw <= 1e-300 {
        return Err(FexError::NumericalFailure("dual certificate vanished after projection".into()));
    }
    w = w.scale(1.0 / nw);
    let annihilation_residual =
        dd.b.matrices().iter().map(|bj| block_compress(&w, bj).frobenius_norm()).fold(0.0, f64::max);
    let gram_violation = min_eigenvalue(&gram_test_matrix(&dd.a, &w, x)?)?;

    // V = W U ι with U whitening W*W on its range.
    let ge = sym_eigen(&SymMatrix::symmetrize(&w.tr_matmul(&w)))?;
    let cut = 1e-12 * ge.max().max(1e-300);
    let cols: Vec<Vec<f64>> =
        (0..n).filter(|&k| ge.values[k] > cut).map(|k| ge.vector(k).iter().map(|v| v / ge.values[k].sqrt()).collect()).collect();
    let u = Matrix::from_columns(n, &cols);
    let iso = IsometryWitness::from_matrix(&dd.b, w.matmul(&u), n)?;
    let compressed_violation = min_eigenvalue(&eval_l(&compress_pencil(&dd.a, &iso)?, x)?)?;
    Ok(DntWitness { w, annihilation_residual, gram_violation, isometry: iso, compressed_violation })
}

/// `φ(W) = tr(W)·I_n − Σ ⟨Aₗ, W⟩ Xₗ` on `V = span(B)^⊥ ⊂ M_d`.
pub fn phi_map(dd: &DropDescription, x: &MatrixTuple, w: &Matrix) -> Result<SymMatrix> {
    let d = dd.d();
    if w.rows() != d || w.cols() != d {
        return Err(FexError::Shape(format!("φ takes {d} × {d} matrices")));
    }
    let ws = SymMatrix::symmetrize(w);
    let scale = w.frobenius_norm().max(1.0);
    for bj in dd.b.matrices() {
        if ws.dot(bj).abs() > 1e-9 * scale {
            return Err(FexError::Domain("argument of φ is not orthogonal to span(B)".into()));
        }
    }
    let n = x.n();
    let mut out = SymMatrix::identity(n).scale(w.trace());
    for (al, xl) in dd.a.matrices().iter().zip(x.entries()) {
        out.add_scaled(xl, -ws.dot(al));
    }
    Ok(out)
}

/// `(φ(W_pq))_{pq}` for a block matrix of order `r·d`, indexed `p·n + i`.
pub fn phi_block(dd: &DropDescription, x: &MatrixTuple, blocks: &Matrix) -> Result<SymMatrix> {
    let d = dd.d();
    if !blocks.is_square() || blocks.rows() % d != 0 {
        return Err(FexError::Shape("block matrix order must be a multiple of d".into()));
    }
    let r = blocks.rows() / d;
    let n = x.n();
    let mut out = Matrix::zeros(r * n, r * n);
    for p in 0..r {
        for s in 0..r {
            let wb = blocks.submatrix(p * d, s * d, d, d);
            let ws = SymMatrix::symmetrize(&wb);
            let scale = wb.frobenius_norm().max(1.0);
            if dd.b.matrices().iter().any(|bj| ws.dot(bj).abs() > 1e-9 * scale) {
                return Err(FexError::Domain("block is not orthogonal to span(B)".into()));
            }
            // ⟨A, W_pq⟩ uses the full (possibly non-symmetric) block.
            let mut f = Matrix::identity(n).scale(wb.trace());
            for (al, xl) in dd.a.matrices().iter().zip(x.entries()) {
                f.add_scaled(xl, -wb.dot(al));
            }
            out.set_block(p * n, s * n, &f);
        }
    }
    Ok(SymMatrix::symmetrize(&out))
}
