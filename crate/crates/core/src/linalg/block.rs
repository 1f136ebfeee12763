use serde::{Deserialize, Serialize};

use crate::error::{FexError, Result};
use crate::linalg::decomp::{kernel_basis, pinv};
use crate::linalg::eigen::min_eigenvalue;
use crate::linalg::{Matrix, SymMatrix};

/// Kronecker product; row index of `M ⊗ N` is `i·N.rows + k`.
pub fn kron(m: &Matrix, n: &Matrix) -> Matrix {
    let (mr, mc, nr, nc) = (m.rows(), m.cols(), n.rows(), n.cols());
    let mut out = Matrix::zeros(mr * nr, mc * nc);
    for i in 0..mr {
        for j in 0..mc {
            let a = m[(i, j)];
            if a == 0.0 {
                continue;
            }
            for k in 0..nr {
                for l in 0..nc {
                    out[(i * nr + k, j * nc + l)] = a * n[(k, l)];
                }
            }
        }
    }
    out
}

pub fn kron_sym(m: &SymMatrix, n: &SymMatrix) -> SymMatrix {
    SymMatrix::from_lower(kron(m, n)).expect("Kronecker product of square matrices is square")
}

/// Index permutation taking the `a⊗i` ordering of `ℝᵈ ⊗ ℝᴺ` (with
/// `N = Σ block_dims`) to the block-major ordering in which block `b`
/// occupies a contiguous range ordered `a⊗j`, `j < block_dims[b]`.
/// Entry `p` of the result is the old index placed at new position `p`.
pub fn shuffle_permutation(d: usize, block_dims: &[usize]) -> Vec<usize> {
    let total: usize = block_dims.iter().sum();
    let mut perm = Vec::with_capacity(d * total);
    let mut offset = 0;
    for &s in block_dims {
        for a in 0..d {
            for j in 0..s {
                perm.push(a * total + offset + j);
            }
        }
        offset += s;
    }
    perm
}

fn check_shuffle_dims(m: &Matrix, d: usize, block_dims: &[usize]) -> Result<usize> {
    let total: usize = block_dims.iter().sum();
    if !m.is_square() || m.rows() != d * total {
        return Err(FexError::Shape(format!(
            "matrix of shape {}x{} is not compatible with d={d} and blocks {block_dims:?}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(total)
}

/// Permutation similarity turning the evaluation of a pencil at a block
/// tuple into block form, e.g. `L_A([[X,β],[β*,γ]])` into
/// `[[L_A(X), −Λ_A(β)], [−Λ_A(β*), L_A(γ)]]`.
pub fn canonical_shuffle(m: &Matrix, d: usize, block_dims: &[usize]) -> Result<Matrix> {
    check_shuffle_dims(m, d, block_dims)?;
    Ok(permute_symmetric(m, &shuffle_permutation(d, block_dims)))
}

/// Inverse of [`canonical_shuffle`].
pub fn canonical_unshuffle(m: &Matrix, d: usize, block_dims: &[usize]) -> Result<Matrix> {
    check_shuffle_dims(m, d, block_dims)?;
    let perm = shuffle_permutation(d, block_dims);
    let mut inv = vec![0; perm.len()];
    for (p, &q) in perm.iter().enumerate() {
        inv[q] = p;
    }
    Ok(permute_symmetric(m, &inv))
}

/// Swaps the tensor factors: the entry at `a·q + i` moves to `i·p + a`.
/// Applying `(p, q)` and then `(q, p)` restores the input exactly.
pub fn commutation_shuffle(m: &Matrix, p: usize, q: usize) -> Result<Matrix> {
    if !m.is_square() || m.rows() != p * q {
        return Err(FexError::Shape(format!("commutation shuffle needs order {}, got {}", p * q, m.rows())));
    }
    let mut perm = vec![0; p * q];
    for a in 0..p {
        for i in 0..q {
            perm[i * p + a] = a * q + i;
        }
    }
    Ok(permute_symmetric(m, &perm))
}

/// `out[p][q] = m[perm[p]][perm[q]]`.
pub fn permute_symmetric(m: &Matrix, perm: &[usize]) -> Matrix {
    let n = perm.len();
    let mut out = Matrix::zeros(n, n);
    for (p, &pp) in perm.iter().enumerate() {
        for (q, &qq) in perm.iter().enumerate() {
            out[(p, q)] = m[(pp, qq)];
        }
    }
    out
}

/// Outcome of the generalized Schur complement test on `[[R, S], [Sᵀ, T]]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchurDiagnostics {
    pub psd: bool,
    pub t_min_eig: f64,
    /// `‖S K‖_F` for an orthonormal basis `K` of `ker T`.
    pub containment_residual: f64,
    /// Minimum eigenvalue of `R − S T† Sᵀ` (`+inf` when `R` is empty).
    pub complement_min_eig: f64,
}

/// PSD test of `P = [[R, S], [Sᵀ, T]]` with `R` of order `r_dim` via
/// `T ⪰ 0`, `ker T ⊆ ker S` and `R − S T† Sᵀ ⪰ 0`.
pub fn schur_complement_psd_check(p: &SymMatrix, r_dim: usize, rank_tol: f64, tol: f64) -> Result<SchurDiagnostics> {
    let n = p.order();
    if r_dim > n {
        return Err(FexError::Shape(format!("leading block {r_dim} exceeds order {n}")));
    }
    let t_dim = n - r_dim;
    let scale = p.max_abs().max(1.0);
    let r = p.sub_block(0, r_dim);
    let t = p.sub_block(r_dim, t_dim);
    let s = p.submatrix(0, r_dim, r_dim, t_dim);

    let t_min_eig = min_eigenvalue(&t)?;
    let ker = kernel_basis(&t, rank_tol)?;
    let containment_residual = if ker.is_empty() || r_dim == 0 { 0.0 } else { s.matmul(&ker.vectors).frobenius_norm() };
    let complement_min_eig = if r_dim == 0 {
        f64::INFINITY
    } else {
        let tp = pinv(&t, rank_tol)?;
        let stst = SymMatrix::symmetrize(&s.matmul(&tp).matmul(&s.transpose()));
        min_eigenvalue(&r.sub(&stst))?
    };
    let psd = t_min_eig >= -tol * scale
        && containment_residual <= tol.sqrt() * scale
        && complement_min_eig >= -tol * scale;
    Ok(SchurDiagnostics { psd, t_min_eig, containment_residual, complement_min_eig })
}

/// Block LDLᵀ of a symmetric matrix with the given diagonal block sizes,
/// using pseudoinverses of the pivots. Returns the pivots (successive Schur
/// complements) in order.
pub fn block_ldl_pivots(p: &SymMatrix, dims: &[usize], rank_tol: f64) -> Result<Vec<SymMatrix>> {
    let total: usize = dims.iter().sum();
    if total != p.order() {
        return Err(FexError::Shape(format!("block sizes {dims:?} do not sum to order {}", p.order())));
    }
    let mut rest = p.clone();
    let mut pivots = Vec::with_capacity(dims.len());
    for &k in dims {
        let m = rest.order();
        let pivot = rest.sub_block(0, k);
        let tail = rest.sub_block(k, m - k);
        let off = rest.submatrix(k, 0, m - k, k);
        let pp = pinv(&pivot, rank_tol)?;
        let upd = SymMatrix::symmetrize(&off.matmul(&pp).matmul(&off.transpose()));
        rest = tail.sub(&upd);
        pivots.push(pivot);
    }
    Ok(pivots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swap() -> Matrix {
        Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]])
    }

    #[test]
    fn kron_identities() {
        assert_eq!(kron(&Matrix::identity(2), &Matrix::identity(3)), Matrix::identity(6));
        let e = Matrix::column_vector(&[0.0, 1.0]);
        let p = kron(&e, &e.transpose());
        assert_eq!(p, Matrix::diag(&[0.0, 1.0]));
    }

    #[test]
    fn kron_block_structure() {
        let k = kron(&Matrix::diag(&[1.0, -1.0]), &swap());
        let s = swap();
        assert_eq!(k.submatrix(0, 0, 2, 2), s);
        assert_eq!(k.submatrix(2, 2, 2, 2), -&s);
        assert_eq!(k.submatrix(0, 2, 2, 2), Matrix::zeros(2, 2));
    }

    #[test]
    fn shuffle_of_identity_is_identity() {
        let out = canonical_shuffle(&Matrix::identity(8), 2, &[3, 1]).unwrap();
        assert_eq!(out, Matrix::identity(8));
    }

    #[test]
    fn shuffle_round_trips() {
        let mut m = Matrix::zeros(6, 6);
        for i in 0..6 {
            for j in 0..6 {
                m[(i, j)] = (i * 7 + j) as f64;
            }
        }
        let s = canonical_shuffle(&m, 2, &[2, 1]).unwrap();
        assert_eq!(canonical_unshuffle(&s, 2, &[2, 1]).unwrap(), m);
        let c = commutation_shuffle(&m, 2, 3).unwrap();
        assert_eq!(commutation_shuffle(&c, 3, 2).unwrap(), m);
    }

    #[test]
    fn shuffle_rejects_bad_dims() {
        assert!(matches!(canonical_shuffle(&Matrix::identity(5), 2, &[2, 1]), Err(FexError::Shape(_))));
    }

    #[test]
    fn schur_examples() {
        let id = schur_complement_psd_check(&SymMatrix::identity(4), 2, 1e-9, 1e-9).unwrap();
        assert!(id.psd);
        let ones = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let d = schur_complement_psd_check(&ones, 1, 1e-9, 1e-9).unwrap();
        assert!(d.psd);
        assert!(d.complement_min_eig.abs() < 1e-14);
        let bad = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 1.0]]);
        assert!(!schur_complement_psd_check(&bad, 1, 1e-9, 1e-9).unwrap().psd);
        // Kernel containment failure with T singular.
        let bad2 = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 0.0]]);
        let d2 = schur_complement_psd_check(&bad2, 1, 1e-9, 1e-9).unwrap();
        assert!(!d2.psd && d2.containment_residual > 0.5);
    }

    #[test]
    fn ldl_pivots_of_diagonal() {
        let p = SymMatrix::diag(&[1.0, 2.0, 3.0]);
        let piv = block_ldl_pivots(&p, &[1, 2], 1e-9).unwrap();
        assert_eq!(piv[1].as_matrix(), &Matrix::diag(&[2.0, 3.0]));
    }
}
