use crate::error::{FexError, Result};
use crate::linalg::decomp::{nullspace, select_columns};
use crate::linalg::{pinv, sym_eigen, Matrix, SymMatrix};
use crate::pencil::{eval_l, level1_radius, membership, LinearPencil, MatrixTuple, MembershipVerdict, FEAS_TOL};
use crate::random;
use crate::sdp::{feasible_point, solve, LmiBlock, SdpProblem, SdpSettings, SdpStatus};

use super::{beta_norm, BodyKind, BodySpec, ConvexBodyOracle, KERNEL_TOL};

/// Orthonormal columns spanning the eigenspaces of `m` with eigenvalue at
/// most `tol·max(1, ρ)` (negative ones included).
pub(crate) fn low_eigvecs(m: &SymMatrix, tol: f64) -> Result<(Matrix, Matrix, Vec<f64>)> {
    let e = sym_eigen(m)?;
    let cut = tol * e.spectral_radius().max(1.0);
    let (lo, hi): (Vec<usize>, Vec<usize>) = (0..m.order()).partition(|&i| e.values[i] <= cut);
    let vals = hi.iter().map(|&i| e.values[i]).collect();
    Ok((select_columns(&e.vectors, &lo), select_columns(&e.vectors, &hi), vals))
}

/// Matrix of the linear map `β ↦ Λ_A(β*)K` (rows `a·k + c`, columns `ℓ·n + i`).
pub(crate) fn containment_map(a: &LinearPencil, n: usize, k: &Matrix) -> Matrix {
    let d = a.d();
    let kc = k.cols();
    let mut g = Matrix::zeros(d * kc, a.g() * n);
    for (l, al) in a.matrices().iter().enumerate() {
        for i in 0..n {
            for r in 0..d {
                for c in 0..kc {
                    let mut s = 0.0;
                    for b in 0..d {
                        s += al[(r, b)] * k[(b * n + i, c)];
                    }
                    g[(r * kc + c, l * n + i)] = s;
                }
            }
        }
    }
    g
}

/// `Λ_A(β*) = Σ Aₗ ⊗ βₗᵀ` as a `d × dn` matrix.
pub(crate) fn lambda_beta_star(a: &LinearPencil, beta: &[Vec<f64>]) -> Matrix {
    let rows: Vec<Matrix> = beta.iter().map(|b| Matrix::from_rows(&[b.clone()])).collect();
    a.lambda_rect(&rows)
}

/// `{β : ker L_A(X) ⊆ ker Λ_A(β*)}` as orthonormal columns.
pub fn dilation_subspace_spectrahedron(a: &LinearPencil, x: &MatrixTuple, tol: f64) -> Result<Matrix> {
    let l = eval_l(a, x)?;
    let e = sym_eigen(&l)?;
    if e.min() < -FEAS_TOL {
        return Err(FexError::NotMember { margin: e.min() });
    }
    let (k, _, _) = low_eigvecs(&l, tol)?;
    let n = x.n();
    if k.cols() == 0 {
        return Ok(Matrix::identity(a.g() * n));
    }
    nullspace(&containment_map(a, n, &k), 1e-8)
}

/// Oracle for the free spectrahedron `D_A` of a bounded pencil.
#[derive(Debug, Clone)]
pub struct PencilOracle {
    pencil: LinearPencil,
    radius: f64,
    tol: f64,
}

impl PencilOracle {
    pub fn new(pencil: LinearPencil) -> Result<Self> {
        let radius = level1_radius(&pencil)?;
        if radius > 1e3 {
            return Err(FexError::Precondition("pencil is unbounded (level-one radius exceeds 1e3)".into()));
        }
        Ok(PencilOracle { pencil, radius, tol: FEAS_TOL })
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn pencil(&self) -> &LinearPencil {
        &self.pencil
    }

    /// `M = Λ_A(β*) L_A(X)† Λ_A(β)`, after checking `β` is dilatable.
    fn corner_matrix(&self, x: &MatrixTuple, beta: &[Vec<f64>]) -> Result<SymMatrix> {
        let a = &self.pencil;
        let l = eval_l(a, x)?;
        let (k, _, _) = low_eigvecs(&l, KERNEL_TOL)?;
        let bs = lambda_beta_star(a, beta);
        let nb = beta_norm(beta);
        if nb == 0.0 || (k.cols() > 0 && bs.matmul(&k).frobenius_norm() > 1e-7 * nb) {
            return Err(FexError::NoDilation);
        }
        let lp = pinv(&l, KERNEL_TOL)?;
        Ok(SymMatrix::symmetrize(&bs.matmul(lp.as_matrix()).matmul(&bs.transpose())))
    }

    /// Exact walk to an extreme point of `{γ : I − Λ_A(γ) − M ⪰ 0}`: move
    /// along directions that keep the current kernel until none is left.
    fn face_walk(&self, m: &SymMatrix, start: &[f64], seed: u64) -> Result<Vec<f64>> {
        let a = &self.pencil;
        let g = a.g();
        let d = a.d();
        let base = SymMatrix::identity(d).sub(m);
        let mut gamma = start.to_vec();
        let mut rng = random::rng(seed);
        for _ in 0..=g {
            let r = base.sub(&a.combine(&gamma));
            let e = sym_eigen(&r)?;
            let cut = (KERNEL_TOL * e.spectral_radius().max(1.0)).max(-2.0 * e.min());
            let (lo, hi): (Vec<usize>, Vec<usize>) = (0..d).partition(|&i| e.values[i] <= cut);
            let kmat = select_columns(&e.vectors, &lo);
            let dirs = if kmat.cols() == 0 {
                Matrix::identity(g)
            } else {
                let mut map = Matrix::zeros(d * kmat.cols(), g);
                for (l, al) in a.matrices().iter().enumerate() {
                    let ak = al.matmul(&kmat);
                    for (idx, v) in ak.data().iter().enumerate() {
                        map[(idx, l)] = *v;
                    }
                }
                nullspace(&map, 1e-9)?
            };
            if dirs.cols() == 0 {
                return Ok(gamma);
            }
            let delta = dirs.matvec(&random::unit_vector(&mut rng, dirs.cols()));
            // Largest step keeping the range block PSD.
            let p = select_columns(&e.vectors, &hi);
            let inv_sqrt: Vec<f64> = hi.iter().map(|&i| 1.0 / e.values[i].sqrt()).collect();
            let mut w = a.combine(&delta).congruence(&p).into_matrix();
            for i in 0..w.rows() {
                for j in 0..w.cols() {
                    w[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
                }
            }
            let ew = sym_eigen(&SymMatrix::symmetrize(&w))?;
            let (sign, top) = if ew.max() >= -ew.min() { (1.0, ew.max()) } else { (-1.0, -ew.min()) };
            if top <= 1e-14 {
                return Err(FexError::NumericalFailure("corner set is unbounded along a face direction".into()));
            }
            let t = sign / top;
            for (gv, dv) in gamma.iter_mut().zip(&delta) {
                *gv += t * dv;
            }
        }
        Err(FexError::NumericalFailure("face walk did not terminate".into()))
    }

    fn corner_start(&self, m: &SymMatrix) -> Result<Vec<f64>> {
        let g = self.pencil.g();
        let mut block = LmiBlock::new(SymMatrix::identity(self.pencil.d()).sub(m));
        for (i, al) in self.pencil.matrices().iter().enumerate() {
            block.push_term(i, al.scale(-1.0));
        }
        let mut p = SdpProblem::new(g).with_bound(10.0 * self.radius.max(1.0));
        p.add_block(block);
        let r = feasible_point(&p, &SdpSettings::default())?;
        if r.status != SdpStatus::Optimal {
            return Err(FexError::NumericalFailure("corner set appears empty".into()));
        }
        Ok(r.y)
    }
}

impl ConvexBodyOracle for PencilOracle {
    fn arity(&self) -> usize {
        self.pencil.g()
    }

    fn kind(&self) -> BodyKind {
        BodyKind::Spectrahedron
    }

    fn describe(&self) -> BodySpec {
        BodySpec::Spectrahedron { pencil: self.pencil.clone() }
    }

    fn radius(&self) -> f64 {
        self.radius
    }

    fn membership(&self, x: &MatrixTuple) -> Result<MembershipVerdict> {
        membership(&self.pencil, x, self.tol)
    }

    fn dilation_subspace(&self, x: &MatrixTuple) -> Result<Matrix> {
        dilation_subspace_spectrahedron(&self.pencil, x, KERNEL_TOL)
    }

    /// With `M = Λ(β*)L(X)†Λ(β)` the dilation is a member iff
    /// `I − Λ(γ) − α²M ⪰ 0`; maximize `s = α²` by SDP, then snap `s` to the
    /// exact boundary for the returned corner.
    fn alpha_max(&self, x: &MatrixTuple, beta: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
        let v = self.membership(x)?;
        if !v.inside {
            return Err(FexError::NotMember { margin: v.margin });
        }
        let m = self.corner_matrix(x, beta)?;
        let g = self.pencil.g();
        let r = self.radius.max(1.0);
        let nb = beta_norm(beta);
        // The last variable is t = s·‖M‖, which keeps the LMI well scaled.
        let mn = m.max_abs().max(1e-300);
        let bound = 10.0 * r.max(r * r * g as f64 / (nb * nb)).max(r.max(1.0) * mn);
        let mut block = LmiBlock::new(SymMatrix::identity(self.pencil.d()));
        for (i, al) in self.pencil.matrices().iter().enumerate() {
            block.push_term(i, al.scale(-1.0));
        }
        block.push_term(g, m.scale(-1.0 / mn));
        let mut obj = vec![0.0; g + 1];
        obj[g] = 1.0;
        let mut p = SdpProblem::new(g + 1).with_objective(obj).with_bound(bound);
        p.add_block(block);
        let res = solve(&p, &SdpSettings::default())?;
        // Only the corner is used below (α is snapped exactly), so a stalled
        // but nearly feasible iterate is acceptable.
        let usable = res.status == SdpStatus::Optimal || (res.status == SdpStatus::NumericalFailure && p.margin(&res.y)? >= -1e-7);
        if !usable || res.y[g] <= 0.0 {
            return Err(FexError::NumericalFailure("α maximization failed".into()));
        }
        let gamma0 = res.y[..g].to_vec();
        let r0 = SymMatrix::identity(self.pencil.d()).sub(&self.pencil.combine(&gamma0));
        let e = sym_eigen(&r0)?;
        let half = e.apply_fn(|t| if t > KERNEL_TOL * e.spectral_radius().max(1.0) { 1.0 / t.sqrt() } else { 0.0 });
        let top = sym_eigen(&m.congruence(half.as_matrix()))?.max();
        let s = if top > 0.0 { 1.0 / top } else { res.y[g] / mn };
        Ok((s.sqrt(), gamma0))
    }

    fn gamma_problem(&self, x: &MatrixTuple, beta_hat: &[Vec<f64>]) -> Result<SdpProblem> {
        let m = self.corner_matrix(x, beta_hat)?;
        let g = self.pencil.g();
        let mut block = LmiBlock::new(SymMatrix::identity(self.pencil.d()).sub(&m));
        for (i, al) in self.pencil.matrices().iter().enumerate() {
            block.push_term(i, al.scale(-1.0));
        }
        let mut p = SdpProblem::new(g).with_bound(10.0 * self.radius.max(1.0));
        p.add_block(block);
        Ok(p)
    }

    fn gamma_margin(&self, x: &MatrixTuple, beta_hat: &[Vec<f64>], gamma: &[f64]) -> Result<f64> {
        let m = self.corner_matrix(x, beta_hat)?;
        let r = SymMatrix::identity(self.pencil.d()).sub(&m).sub(&self.pencil.combine(gamma));
        Ok(sym_eigen(&r)?.min())
    }

    fn gamma_extreme(&self, x: &MatrixTuple, beta_hat: &[Vec<f64>], start: Option<&[f64]>, seed: u64) -> Result<Vec<f64>> {
        let m = self.corner_matrix(x, beta_hat)?;
        let start = match start {
            Some(s) => s.to_vec(),
            None => self.corner_start(&m)?,
        };
        self.face_walk(&m, &start, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extremal::{gamma_extreme_point, maximal_one_dilation};

    fn oracle(a: LinearPencil) -> PencilOracle {
        PencilOracle::new(a).unwrap()
    }

    #[test]
    fn interval_dilation_subspaces() {
        let a = LinearPencil::interval();
        let d = dilation_subspace_spectrahedron(&a, &MatrixTuple::from_scalars(&[1.0]), KERNEL_TOL).unwrap();
        assert_eq!(d.cols(), 0);
        let d = dilation_subspace_spectrahedron(&a, &MatrixTuple::from_scalars(&[0.0]), KERNEL_TOL).unwrap();
        assert_eq!(d.cols(), 1);
        let d = dilation_subspace_spectrahedron(&LinearPencil::cube(2), &MatrixTuple::from_scalars(&[1.0, -1.0]), KERNEL_TOL).unwrap();
        assert_eq!(d.cols(), 0);
    }

    #[test]
    fn outside_point_is_rejected() {
        let r = dilation_subspace_spectrahedron(&LinearPencil::interval(), &MatrixTuple::from_scalars(&[1.5]), KERNEL_TOL);
        assert!(matches!(r, Err(FexError::NotMember { .. })));
    }

    #[test]
    fn interval_alpha_and_gamma() {
        let k = oracle(LinearPencil::interval());
        let x = MatrixTuple::from_scalars(&[0.0]);
        let (alpha, gamma) = k.alpha_max(&x, &[vec![1.0]]).unwrap();
        assert!((alpha - 1.0).abs() < 1e-9 && gamma[0].abs() < 1e-6);
        let (alpha2, _) = k.alpha_max(&x, &[vec![2.0]]).unwrap();
        assert!((alpha2 - 0.5).abs() < 1e-9);
        let g = gamma_extreme_point(&k, &x, &[vec![1.0]], 3).unwrap();
        assert!(g[0].abs() < 1e-9);
    }

    #[test]
    fn cube_alpha() {
        let k = oracle(LinearPencil::cube(2));
        let (alpha, _) = k.alpha_max(&MatrixTuple::from_scalars(&[0.0, 0.0]), &[vec![1.0], vec![0.0]]).unwrap();
        assert!((alpha - 1.0).abs() < 1e-9);
    }

    #[test]
    fn segment_corner_is_an_endpoint() {
        // Γ for the cube at X = (0, 0) with β̂ = (1, 0): γ₁ = 0 and γ₂ ∈ [−1, 1].
        let k = oracle(LinearPencil::cube(2));
        let x = MatrixTuple::from_scalars(&[0.0, 0.0]);
        let g = gamma_extreme_point(&k, &x, &[vec![1.0], vec![0.0]], 5).unwrap();
        assert!(g[0].abs() < 1e-9);
        assert!((g[1].abs() - 1.0).abs() < 1e-9, "{g:?}");
    }

    #[test]
    fn non_dilatable_direction() {
        let k = oracle(LinearPencil::interval());
        let r = k.alpha_max(&MatrixTuple::from_scalars(&[1.0]), &[vec![1.0]]);
        assert!(matches!(r, Err(FexError::NoDilation)));
    }

    #[test]
    fn interval_step() {
        let k = oracle(LinearPencil::interval());
        let (step, y) = maximal_one_dilation(&k, &MatrixTuple::from_scalars(&[0.0]), 1).unwrap();
        assert_eq!((step.dim_before, step.dim_after), (1, 0));
        let sq = y[0].matmul(&y[0]);
        assert!((&sq - &Matrix::identity(2)).max_abs() < 1e-9);
    }
}
