use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::decomp::{nullspace, select_columns};
use crate::linalg::{sym_eigen, symmetric_basis, Matrix, SymMatrix};
use crate::pencil::MatrixTuple;
use crate::random;

/// Basis of `{T = Tᵀ : T Xₗ = Xₗ T for all ℓ}`, orthonormal in the
/// Frobenius inner product.
pub fn symmetric_commutant(x: &MatrixTuple) -> Result<Vec<SymMatrix>> {
    let n = x.n();
    let basis = symmetric_basis(n);
    let mut g = Matrix::zeros(x.g() * n * n, basis.len());
    for (col, e) in basis.iter().enumerate() {
        for (l, xl) in x.entries().iter().enumerate() {
            let c = &e.matmul(xl) - &xl.matmul(e);
            for (idx, v) in c.data().iter().enumerate() {
                g[(l * n * n + idx, col)] = *v;
            }
        }
    }
    let ns = nullspace(&g, 1e-8)?;
    Ok((0..ns.cols())
        .map(|k| {
            let mut t = SymMatrix::zeros(n);
            for (i, e) in basis.iter().enumerate() {
                t.add_scaled(e, ns[(i, k)]);
            }
            t
        })
        .collect())
}

/// An irreducible summand `Q*XQ` with its orthonormal embedding `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub tuple: MatrixTuple,
    /// `n × nᵢ` with orthonormal columns.
    pub embedding: Matrix,
    pub commutant_dim: usize,
}

/// Splits `x` into irreducible summands using eigenspaces of random
/// symmetric commutant elements, recursing until each summand has a
/// one-dimensional symmetric commutant (at most 5 draws per split).
pub fn irreducible_decomposition(x: &MatrixTuple, seed: u64) -> Result<Vec<Component>> {
    let mut rng = random::rng(seed);
    let mut done: Vec<Component> = Vec::new();
    let mut work = vec![Matrix::identity(x.n())];
    while let Some(q) = work.pop() {
        let part = x.congruence(&q);
        let comm = symmetric_commutant(&part)?;
        if comm.len() <= 1 {
            done.push(Component { tuple: part, embedding: q, commutant_dim: comm.len() });
            continue;
        }
        let mut split = None;
        for _ in 0..5 {
            let coef = random::gaussian_vec(&mut rng, comm.len());
            let mut t = SymMatrix::zeros(part.n());
            for (c, m) in coef.iter().zip(&comm) {
                t.add_scaled(m, *c);
            }
            let groups = eigen_groups(&t)?;
            if groups.len() > 1 {
                split = Some(groups);
                break;
            }
        }
        match split {
            Some(groups) => {
                for g in groups {
                    work.push(q.matmul(&g));
                }
            }
            None => done.push(Component { tuple: part, embedding: q, commutant_dim: comm.len() }),
        }
    }
    // Stable order: by first row index carrying weight, then size.
    done.sort_by(|a, b| leading_row(&a.embedding).cmp(&leading_row(&b.embedding)).then(a.tuple.n().cmp(&b.tuple.n())));
    Ok(done)
}

fn leading_row(q: &Matrix) -> usize {
    (0..q.rows()).find(|&i| (0..q.cols()).any(|j| q[(i, j)].abs() > 1e-8)).unwrap_or(q.rows())
}

/// Eigenspaces of `t`, clustering eigenvalues closer than `1e-6·‖t‖`.
fn eigen_groups(t: &SymMatrix) -> Result<Vec<Matrix>> {
    let e = sym_eigen(t)?;
    let gap = 1e-6 * e.spectral_radius().max(1e-300);
    let mut groups: Vec<Vec<usize>> = vec![vec![0]];
    for i in 1..e.values.len() {
        if e.values[i - 1] - e.values[i] > gap {
            groups.push(vec![i]);
        } else {
            groups.last_mut().expect("nonempty").push(i);
        }
    }
    Ok(groups.iter().map(|g| select_columns(&e.vectors, g)).collect())
}
