use crate::error::Result;
use crate::linalg::{pinv, Matrix, SymMatrix};
use crate::pencil::{eval_l, LinearPencil, MatrixTuple};

use super::spectrahedron::lambda_beta_star;
use super::KERNEL_TOL;

/// Pivots of the block LDLᵀ of the shuffled pencil evaluated at
/// `[[X, cβ̂, β̂],[cβ̂*, 0, σ],[β̂*, σ, γ̂]]`.
#[derive(Debug, Clone)]
pub struct ChainPivots {
    pub l_x: SymMatrix,
    /// `I − c²Q` with `Q = Λ(β̂*) L(X)† Λ(β̂)`.
    pub middle: SymMatrix,
    /// `L(γ̂) − Q − (Λ(σ) + cQ)(I − c²Q)†(Λ(σ) + cQ)`.
    pub last: SymMatrix,
}

/// The order-`(n+2)` tuple `[[X, cβ̂, β̂],[cβ̂*, 0, σ],[β̂*, σ, γ̂]]`.
pub fn three_by_three_tuple(x: &MatrixTuple, beta_hat: &[Vec<f64>], c: f64, sigma: &[f64], gamma_hat: &[f64]) -> Result<MatrixTuple> {
    let n = x.n();
    let entries = (0..x.g())
        .map(|l| {
            let mut m = Matrix::zeros(n + 2, n + 2);
            m.set_block(0, 0, &x[l]);
            for i in 0..n {
                let b = beta_hat[l][i];
                m[(i, n)] = c * b;
                m[(n, i)] = c * b;
                m[(i, n + 1)] = b;
                m[(n + 1, i)] = b;
            }
            m[(n, n + 1)] = sigma[l];
            m[(n + 1, n)] = sigma[l];
            m[(n + 1, n + 1)] = gamma_hat[l];
            SymMatrix::from_lower(m)
        })
        .collect::<Result<Vec<_>>>()?;
    MatrixTuple::with_order(n + 2, entries)
}

/// Closed-form pivots of the 3×3 chain.
pub fn ldl_chain_3x3(a: &LinearPencil, x: &MatrixTuple, beta_hat: &[Vec<f64>], c: f64, sigma: &[f64], gamma_hat: &[f64]) -> Result<ChainPivots> {
    let d = a.d();
    let l_x = eval_l(a, x)?;
    let bs = lambda_beta_star(a, beta_hat);
    let lp = pinv(&l_x, KERNEL_TOL)?;
    let q = SymMatrix::symmetrize(&bs.matmul(lp.as_matrix()).matmul(&bs.transpose()));
    let id = SymMatrix::identity(d);
    let middle = id.sub(&q.scale(c * c));
    let mid_p = pinv(&middle, KERNEL_TOL)?;
    let mut t = a.combine(sigma).into_matrix();
    t.add_scaled(&q, c);
    let corr = SymMatrix::symmetrize(&t.transpose().matmul(mid_p.as_matrix()).matmul(&t));
    let l_gamma = id.sub(&a.combine(gamma_hat));
    let last = l_gamma.sub(&q).sub(&corr);
    Ok(ChainPivots { l_x, middle, last })
}
