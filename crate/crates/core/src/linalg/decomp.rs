use serde::{Deserialize, Serialize};

use crate::error::{FexError, Result};
use crate::linalg::eigen::sym_eigen;
use crate::linalg::{Matrix, SymMatrix};

/// Default relative tolerance for rank and kernel decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Thin singular value decomposition from one-sided Jacobi.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `m × p` matrix whose nonzero columns are `σₖ uₖ`.
    scaled_left: Matrix,
    /// Singular values, descending.
    pub values: Vec<f64>,
    /// `p × p` orthogonal matrix of right singular vectors.
    pub right: Matrix,
}

impl Svd {
    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// Right singular vectors with `σ ≤ tol · max(1, σ_max)`.
    pub fn null_vectors(&self, tol: f64) -> Matrix {
        let cut = tol * self.max().max(1.0);
        let idx: Vec<usize> = (0..self.values.len()).filter(|&k| self.values[k] <= cut).collect();
        select_columns(&self.right, &idx)
    }

    /// Left singular vectors with `σ > tol · max(1, σ_max)`.
    pub fn range_vectors(&self, tol: f64) -> Matrix {
        let cut = tol * self.max().max(1.0);
        let m = self.scaled_left.rows();
        let cols: Vec<Vec<f64>> = (0..self.values.len())
            .filter(|&k| self.values[k] > cut)
            .map(|k| self.scaled_left.column(k).iter().map(|x| x / self.values[k]).collect())
            .collect();
        Matrix::from_columns(m, &cols)
    }
}

pub fn select_columns(m: &Matrix, idx: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(m.rows(), idx.len());
    for (c, &j) in idx.iter().enumerate() {
        for i in 0..m.rows() {
            out[(i, c)] = m[(i, j)];
        }
    }
    out
}

/// One-sided (Hestenes) Jacobi SVD; accurate small singular values, which the
/// kernel-containment computations depend on.
pub fn svd(g: &Matrix) -> Result<Svd> {
    let m = g.rows();
    let p = g.cols();
    let mut u = g.clone();
    let mut v = Matrix::identity(p);
    let mut converged = p <= 1;
    // Pairs of columns that are both at roundoff level are left alone.
    let floor = 1e-30 * g.dot(g);
    for _ in 0..80 {
        if converged {
            break;
        }
        let mut rotated = false;
        for i in 0..p {
            for j in (i + 1)..p {
                let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
                for r in 0..m {
                    let ui = u[(r, i)];
                    let uj = u[(r, j)];
                    a += ui * ui;
                    b += uj * uj;
                    c += ui * uj;
                }
                if c.abs() <= floor || c.abs() <= 1e-15 * (a * b).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (b - a) / (2.0 * c);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for r in 0..m {
                    let ui = u[(r, i)];
                    let uj = u[(r, j)];
                    u[(r, i)] = cs * ui - sn * uj;
                    u[(r, j)] = sn * ui + cs * uj;
                }
                for r in 0..p {
                    let vi = v[(r, i)];
                    let vj = v[(r, j)];
                    v[(r, i)] = cs * vi - sn * vj;
                    v[(r, j)] = sn * vi + cs * vj;
                }
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(FexError::NumericalFailure("one-sided Jacobi SVD did not converge".into()));
    }
    let norms: Vec<f64> = (0..p).map(|k| u.column(k).iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap_or(std::cmp::Ordering::Equal));
    Ok(Svd {
        scaled_left: select_columns(&u, &order),
        values: order.iter().map(|&k| norms[k]).collect(),
        right: select_columns(&v, &order),
    })
}

/// Orthonormal basis (as columns) of the null space of `g`.
pub fn nullspace(g: &Matrix, tol: f64) -> Result<Matrix> {
    if g.rows() == 0 {
        return Ok(Matrix::identity(g.cols()));
    }
    Ok(svd(g)?.null_vectors(tol))
}

/// Orthonormal basis of the column span of `m`.
pub fn range_basis(m: &Matrix, tol: f64) -> Result<Matrix> {
    if m.cols() == 0 {
        return Ok(Matrix::zeros(m.rows(), 0));
    }
    Ok(svd(m)?.range_vectors(tol))
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// orthonormal columns of `k`.
pub fn orthonormal_complement(k: &Matrix) -> Result<Matrix> {
    let n = k.rows();
    if k.cols() == 0 {
        return Ok(Matrix::identity(n));
    }
    let proj = Matrix::identity(n).sub_outer(k);
    let e = sym_eigen(&SymMatrix::symmetrize(&proj))?;
    let idx: Vec<usize> = (0..n).filter(|&i| e.values[i] > 0.5).collect();
    Ok(select_columns(&e.vectors, &idx))
}

impl Matrix {
    /// `self − K Kᵀ`.
    fn sub_outer(mut self, k: &Matrix) -> Matrix {
        let kkt = k.matmul(&k.transpose());
        self.add_scaled(&kkt, -1.0);
        self
    }
}

/// Moore–Penrose pseudoinverse of a symmetric matrix; eigenvalues with
/// `|λ| ≤ rank_tol · max|λ|` are treated as zero.
pub fn pinv(m: &SymMatrix, rank_tol: f64) -> Result<SymMatrix> {
    if m.order() == 0 {
        return Ok(m.clone());
    }
    let e = sym_eigen(m)?;
    let cut = rank_tol * e.spectral_radius();
    Ok(e.apply_fn(|l| if l.abs() > cut && l != 0.0 { 1.0 / l } else { 0.0 }))
}

/// Orthonormal basis of the numerical kernel of a symmetric matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelBasis {
    pub ambient_dim: usize,
    /// `ambient_dim × k` matrix with orthonormal columns.
    pub vectors: Matrix,
    pub tolerance_used: f64,
}

impl KernelBasis {
    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.dim() == 0
    }
}

/// Spans the eigenspaces with `|λ| ≤ tol · max(1, max|λ|)`.
pub fn kernel_basis(m: &SymMatrix, tol: f64) -> Result<KernelBasis> {
    let n = m.order();
    let e = sym_eigen(m)?;
    let cut = tol * e.spectral_radius().max(1.0);
    let idx: Vec<usize> = (0..n).filter(|&i| e.values[i].abs() <= cut).collect();
    Ok(KernelBasis { ambient_dim: n, vectors: select_columns(&e.vectors, &idx), tolerance_used: tol })
}

/// LU factorization with partial pivoting, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct LuFactor {
    lu: Matrix,
    piv: Vec<usize>,
}

impl LuFactor {
    pub fn new(a: &Matrix) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() {
            return Err(FexError::Shape("LU needs a square matrix".into()));
        }
        let mut m = a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let scale = m.max_abs().max(f64::MIN_POSITIVE);
        for col in 0..n {
            let mut p = col;
            for r in (col + 1)..n {
                if m[(r, col)].abs() > m[(p, col)].abs() {
                    p = r;
                }
            }
            if m[(p, col)].abs() <= 1e-300 * scale || !m[(p, col)].is_finite() {
                return Err(FexError::NumericalFailure("singular linear system".into()));
            }
            if p != col {
                for c in 0..n {
                    let tmp = m[(col, c)];
                    m[(col, c)] = m[(p, c)];
                    m[(p, c)] = tmp;
                }
                piv.swap(col, p);
            }
            let d = m[(col, col)];
            for r in (col + 1)..n {
                let f = m[(r, col)] / d;
                m[(r, col)] = f;
                if f == 0.0 {
                    continue;
                }
                for c in (col + 1)..n {
                    m[(r, c)] -= f * m[(col, c)];
                }
            }
        }
        Ok(LuFactor { lu: m, piv })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.piv.len();
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let mut s = x[r];
            for c in 0..r {
                s -= self.lu[(r, c)] * x[c];
            }
            x[r] = s;
        }
        for r in (0..n).rev() {
            let mut s = x[r];
            for c in (r + 1)..n {
                s -= self.lu[(r, c)] * x[c];
            }
            x[r] = s / self.lu[(r, r)];
        }
        x
    }
}

/// Dense LU solve with partial pivoting.
pub fn solve_linear(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.rows() {
        return Err(FexError::Shape("right-hand side length mismatch".into()));
    }
    Ok(LuFactor::new(a)?.solve(b))
}

/// Least-squares solution of `a x = b` with minimum norm, via the SVD.
/// Returns the solution and the residual norm.
pub fn least_squares(a: &Matrix, b: &[f64], tol: f64) -> Result<(Vec<f64>, f64)> {
    let p = a.cols();
    if p == 0 {
        return Ok((vec![], b.iter().map(|x| x * x).sum::<f64>().sqrt()));
    }
    let s = svd(a)?;
    let cut = tol * s.max().max(1.0);
    let mut x = vec![0.0; p];
    for k in 0..s.values.len() {
        let sigma = s.values[k];
        if sigma <= cut {
            continue;
        }
        let u: Vec<f64> = s.scaled_left.column(k).iter().map(|v| v / sigma).collect();
        let coef = u.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / sigma;
        for i in 0..p {
            x[i] += coef * s.right[(i, k)];
        }
    }
    let ax = a.matvec(&x);
    let res = ax.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    Ok((x, res))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_diagonal() {
        let p = pinv(&SymMatrix::diag(&[2.0, 0.0]), DEFAULT_RANK_TOL).unwrap();
        assert!((p[(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(p[(1, 1)], 0.0);
    }

    #[test]
    fn pinv_of_invertible_matches_solve_inverse() {
        let m = SymMatrix::from_rows(&[vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]]);
        let p = pinv(&m, DEFAULT_RANK_TOL).unwrap();
        // Oracle: column-by-column linear solves.
        for j in 0..3 {
            let mut e = vec![0.0; 3];
            e[j] = 1.0;
            let col = solve_linear(m.as_matrix(), &e).unwrap();
            for i in 0..3 {
                assert!((p[(i, j)] - col[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pinv_of_zero_is_zero() {
        let p = pinv(&SymMatrix::zeros(3), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(p.max_abs(), 0.0);
    }

    #[test]
    fn kernel_examples() {
        let k = kernel_basis(&SymMatrix::diag(&[0.0, 1.0]), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(k.dim(), 1);
        assert!((k.vectors[(0, 0)].abs() - 1.0).abs() < 1e-15);
        assert!(kernel_basis(&SymMatrix::identity(3), DEFAULT_RANK_TOL).unwrap().is_empty());
        let k = kernel_basis(&SymMatrix::diag(&[1e-14, 3.0]), 1e-9).unwrap();
        assert_eq!(k.dim(), 1);
        assert!((k.vectors[(0, 0)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn svd_nullspace_of_wide_matrix() {
        let g = Matrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        let n = nullspace(&g, 1e-12).unwrap();
        assert_eq!(n.cols(), 1);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((n[(0, 0)].abs() - h).abs() < 1e-14);
        assert!((n[(0, 0)] + n[(1, 0)]).abs() < 1e-14);
    }

    #[test]
    fn complement_is_orthogonal() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let k = Matrix::from_columns(3, &[vec![h, h, 0.0]]);
        let c = orthonormal_complement(&k).unwrap();
        assert_eq!(c.cols(), 2);
        assert!(k.tr_matmul(&c).max_abs() < 1e-14);
    }

    #[test]
    fn least_squares_consistent_system() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0]]);
        let (x, r) = least_squares(&a, &[1.0, 4.0, 3.0], 1e-12).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12 && r < 1e-12);
    }
}
