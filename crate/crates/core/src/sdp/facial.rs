//! Facial reduction for affine LMIs without interior.
//!
//! A phase-one solve with optimal value `t* ≈ 0` returns a dual `Z ⪰ 0`
//! with `⟨Z, F(y)⟩ = 0` on the feasible set, hence `F(y)·range(Z) = 0`.
//! Imposing these linear equations and compressing the blocks to
//! `range(Z)^⊥` gives an equivalent, smaller LMI; repeat until strictly
//! feasible.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::decomp::{least_squares, nullspace, orthonormal_complement, select_columns};
use crate::linalg::{sym_eigen, Matrix, SymMatrix};

use super::{feasible_point, LmiBlock, SdpProblem, SdpSettings, SdpStatus};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FaceReduction {
    pub feasible: bool,
    /// Feasible points are `z0 + basis·w`.
    pub z0: Vec<f64>,
    pub basis: Matrix,
    /// Per block, orthonormal columns spanning the range of the face.
    pub ranges: Vec<Matrix>,
    /// Relative interior point in `w` coordinates.
    pub w_interior: Vec<f64>,
    /// Minimum eigenvalue of the reduced blocks at `w_interior`.
    pub reduced_margin: f64,
    pub reductions: usize,
}

impl FaceReduction {
    pub fn point(&self, w: &[f64]) -> Vec<f64> {
        let mut z = self.z0.clone();
        let bw = self.basis.matvec(w);
        for (a, b) in z.iter_mut().zip(bw) {
            *a += b;
        }
        z
    }

    pub fn interior_point(&self) -> Vec<f64> {
        self.point(&self.w_interior)
    }

    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    /// The reduced LMI in `w`, with objective `basisᵀc`.
    pub fn reduced_problem(&self, p: &SdpProblem) -> SdpProblem {
        reparametrize(p, &self.z0, &self.basis, &self.ranges)
    }
}

/// The LMI restricted to the affine set `z0 + basis·w`, in the variables `w`.
pub fn restrict_affine(p: &SdpProblem, z0: &[f64], basis: &Matrix) -> SdpProblem {
    let ranges: Vec<Matrix> = p.blocks.iter().map(|b| Matrix::identity(b.order())).collect();
    reparametrize(p, z0, basis, &ranges)
}

fn reparametrize(p: &SdpProblem, z0: &[f64], basis: &Matrix, ranges: &[Matrix]) -> SdpProblem {
    let k = basis.cols();
    let mut q = SdpProblem::new(k);
    q.bound = p.bound;
    q.objective = basis.transpose().matvec(&p.objective);
    for (b, pk) in p.blocks.iter().zip(ranges) {
        let f0 = b.eval(z0).congruence(pk);
        let mut nb = LmiBlock::new(f0);
        let mut dense: Vec<Option<Matrix>> = vec![None; k];
        for (i, f) in &b.terms {
            let c = f.congruence(pk).into_matrix();
            for (j, slot) in dense.iter_mut().enumerate() {
                let coef = basis[(*i, j)];
                if coef == 0.0 {
                    continue;
                }
                match slot {
                    Some(m) => m.add_scaled(&c, coef),
                    None => *slot = Some(c.scale(coef)),
                }
            }
        }
        for (j, slot) in dense.into_iter().enumerate() {
            if let Some(m) = slot {
                if m.max_abs() > 1e-14 * (1.0 + nb.f0.max_abs()) {
                    nb.push_term(j, SymMatrix::symmetrize(&m));
                }
            }
        }
        q.add_block(nb);
    }
    q
}

/// Reduces `{y : F(y) ⪰ 0}` to a face with nonempty interior. `thin_tol`
/// is the phase-one value below which the set is treated as having no
/// interior.
pub fn reduce_face(p: &SdpProblem, settings: &SdpSettings, thin_tol: f64) -> Result<FaceReduction> {
    let m = p.dim;
    let mut z0 = vec![0.0; m];
    let mut basis = Matrix::identity(m);
    let mut ranges: Vec<Matrix> = p.blocks.iter().map(|b| Matrix::identity(b.order())).collect();
    let total: usize = p.blocks.iter().map(|b| b.order()).sum();
    for reductions in 0..=total {
        let q = reparametrize(p, &z0, &basis, &ranges);
        let live = q.blocks.iter().any(|b| b.order() > 0);
        if !live {
            let w = vec![0.0; basis.cols()];
            return Ok(FaceReduction {
                feasible: true,
                z0,
                basis,
                ranges,
                w_interior: w,
                reduced_margin: f64::INFINITY,
                reductions,
            });
        }
        let r = feasible_point(&q, settings)?;
        if r.status == SdpStatus::Infeasible {
            return Ok(infeasible(z0, basis, ranges, r.margin, reductions));
        }
        if r.value > thin_tol && r.margin > 0.0 {
            return Ok(FaceReduction { feasible: true, z0, basis, ranges, w_interior: r.y, reduced_margin: r.margin, reductions });
        }
        if r.status == SdpStatus::NumericalFailure && r.value > thin_tol {
            return Err(crate::FexError::NumericalFailure("phase-one solve failed during facial reduction".into()));
        }
        // Exposing directions from the dual.
        let zmax = r.dual.iter().map(|z| z.max_abs()).fold(0.0, f64::max);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut rhs: Vec<f64> = Vec::new();
        let mut exposed = Vec::with_capacity(q.blocks.len());
        for (b, z) in q.blocks.iter().zip(&r.dual) {
            if b.order() == 0 {
                exposed.push(Matrix::zeros(0, 0));
                continue;
            }
            let e = sym_eigen(z)?;
            let idx: Vec<usize> = (0..b.order()).filter(|&i| e.values[i] > 1e-5 * zmax).collect();
            let mut u = select_columns(&e.vectors, &idx);
            // The dual is only accurate to about the square root of the
            // gap; the near-kernel of F at the phase-one point is sharper.
            if !idx.is_empty() {
                let fe = sym_eigen(&b.eval(&r.y))?;
                let k = idx.len();
                let lo: Vec<usize> = (b.order() - k..b.order()).collect();
                let small = lo.iter().all(|&i| fe.values[i] <= 1e-6 * fe.spectral_radius().max(1.0));
                let aligned = select_columns(&fe.vectors, &lo);
                // Keep the refinement only if it spans (nearly) the same space.
                if small && aligned.tr_matmul(&u).frobenius_norm() >= (k as f64).sqrt() * (1.0 - 1e-3) {
                    u = aligned;
                }
            }
            if u.cols() > 0 {
                let f0u = b.f0.matmul(&u);
                let fiu: Vec<(usize, Matrix)> = b.terms.iter().map(|(i, f)| (*i, f.matmul(&u))).collect();
                for a in 0..b.order() {
                    for c in 0..u.cols() {
                        let mut row = vec![0.0; q.dim];
                        for (i, fu) in &fiu {
                            row[*i] += fu[(a, c)];
                        }
                        rows.push(row);
                        rhs.push(-f0u[(a, c)]);
                    }
                }
            }
            exposed.push(u);
        }
        if exposed.iter().all(|u| u.cols() == 0) {
            return Err(crate::FexError::NumericalFailure("facial reduction found no exposing direction".into()));
        }
        let (w0, n2) = if q.dim == 0 || rows.is_empty() {
            let scale = rhs.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
            if scale > 1e-7 {
                return Ok(infeasible(z0, basis, ranges, r.value, reductions));
            }
            (vec![0.0; q.dim], Matrix::identity(q.dim))
        } else {
            let g = Matrix::from_rows(&rows);
            let (w0, res) = least_squares(&g, &rhs, 1e-10)?;
            let scale = 1.0 + g.max_abs() + rhs.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
            if res > 1e-7 * scale {
                return Ok(infeasible(z0, basis, ranges, r.value, reductions));
            }
            (w0, nullspace(&g, 1e-8)?)
        };
        let shift = basis.matvec(&w0);
        for (a, s) in z0.iter_mut().zip(shift) {
            *a += s;
        }
        basis = basis.matmul(&n2);
        for (pk, u) in ranges.iter_mut().zip(&exposed) {
            if u.cols() > 0 {
                let comp = orthonormal_complement(u)?;
                *pk = pk.matmul(&comp);
            }
        }
    }
    Err(crate::FexError::NumericalFailure("facial reduction did not terminate".into()))
}

fn infeasible(z0: Vec<f64>, basis: Matrix, ranges: Vec<Matrix>, margin: f64, reductions: usize) -> FaceReduction {
    FaceReduction {
        feasible: false,
        w_interior: vec![0.0; basis.cols()],
        z0,
        basis,
        ranges,
        reduced_margin: margin,
        reductions,
    }
}
