use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{FexError, Result};
use crate::linalg::{Matrix, SymMatrix};

#[derive(Serialize, Deserialize)]
struct TupleJson {
    g: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
    matrices: Vec<Vec<f64>>,
}

fn parse_matrices(g: usize, order: usize, data: Vec<Vec<f64>>) -> Result<Vec<SymMatrix>> {
    if data.len() != g {
        return Err(FexError::Parse(format!("expected {g} matrices, found {}", data.len())));
    }
    data.into_iter()
        .map(|m| {
            let mat = Matrix::from_vec(order, order, m)?;
            if mat.symmetry_defect() > 1e-12 * (1.0 + mat.max_abs()) {
                return Err(FexError::Parse("matrix is not symmetric".into()));
            }
            SymMatrix::from_lower(mat)
        })
        .collect()
}

/// A `g`-tuple of symmetric `n × n` matrices.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TupleJson", into = "TupleJson")]
pub struct MatrixTuple {
    n: usize,
    entries: Vec<SymMatrix>,
}

impl TryFrom<TupleJson> for MatrixTuple {
    type Error = FexError;
    fn try_from(j: TupleJson) -> Result<Self> {
        let n = j.n.ok_or_else(|| FexError::Parse("tuple needs field \"n\"".into()))?;
        MatrixTuple::with_order(n, parse_matrices(j.g, n, j.matrices)?)
    }
}

impl From<MatrixTuple> for TupleJson {
    fn from(t: MatrixTuple) -> Self {
        TupleJson { g: t.g(), n: Some(t.n), d: None, matrices: t.entries.into_iter().map(|m| m.into_matrix().into_data()).collect() }
    }
}

impl MatrixTuple {
    pub fn new(entries: Vec<SymMatrix>) -> Result<Self> {
        let n = entries.first().map(|m| m.order()).ok_or_else(|| FexError::Shape("empty tuple".into()))?;
        MatrixTuple::with_order(n, entries)
    }

    pub fn with_order(n: usize, entries: Vec<SymMatrix>) -> Result<Self> {
        if entries.is_empty() {
            return Err(FexError::Shape("tuple needs g ≥ 1".into()));
        }
        if entries.iter().any(|m| m.order() != n) {
            return Err(FexError::Shape("tuple entries must share one order".into()));
        }
        Ok(MatrixTuple { n, entries })
    }

    pub fn zeros(g: usize, n: usize) -> Self {
        MatrixTuple { n, entries: vec![SymMatrix::zeros(n); g] }
    }

    /// Level-one point.
    pub fn from_scalars(x: &[f64]) -> Self {
        MatrixTuple { n: 1, entries: x.iter().map(|v| SymMatrix::diag(&[*v])).collect() }
    }

    pub fn g(&self) -> usize {
        self.entries.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[SymMatrix] {
        &self.entries
    }

    pub fn direct_sum(&self, other: &MatrixTuple) -> Result<MatrixTuple> {
        if self.g() != other.g() {
            return Err(FexError::Shape("direct sum of tuples with different arity".into()));
        }
        let n = self.n + other.n;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| {
                let mut m = Matrix::zeros(n, n);
                m.set_block(0, 0, a);
                m.set_block(self.n, self.n, b);
                SymMatrix::from_lower(m).expect("square")
            })
            .collect();
        Ok(MatrixTuple { n, entries })
    }

    /// `Vᵀ Xₗ V` for each entry.
    pub fn congruence(&self, v: &Matrix) -> MatrixTuple {
        assert_eq!(v.rows(), self.n);
        MatrixTuple { n: v.cols(), entries: self.entries.iter().map(|x| x.congruence(v)).collect() }
    }

    /// The 1-dilation `[[X, β],[βᵀ, γ]]`; `beta` holds `g` vectors of length `n`.
    pub fn dilate(&self, beta: &[Vec<f64>], gamma: &[f64]) -> Result<MatrixTuple> {
        if beta.len() != self.g() || gamma.len() != self.g() || beta.iter().any(|b| b.len() != self.n) {
            return Err(FexError::Shape("dilation data does not match the tuple".into()));
        }
        let n = self.n + 1;
        let entries = (0..self.g())
            .map(|l| {
                let mut m = Matrix::zeros(n, n);
                m.set_block(0, 0, &self.entries[l]);
                for i in 0..self.n {
                    m[(i, self.n)] = beta[l][i];
                    m[(self.n, i)] = beta[l][i];
                }
                m[(self.n, self.n)] = gamma[l];
                SymMatrix::from_lower(m).expect("square")
            })
            .collect();
        Ok(MatrixTuple { n, entries })
    }

    pub fn scale(&self, s: f64) -> MatrixTuple {
        MatrixTuple { n: self.n, entries: self.entries.iter().map(|m| m.scale(s)).collect() }
    }

    pub fn add(&self, other: &MatrixTuple) -> MatrixTuple {
        MatrixTuple { n: self.n, entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a.add(b)).collect() }
    }

    pub fn sub(&self, other: &MatrixTuple) -> MatrixTuple {
        MatrixTuple { n: self.n, entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a.sub(b)).collect() }
    }

    /// `(Σ ‖Xₗ‖_F²)^{1/2}`.
    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|m| m.dot(m)).sum::<f64>().sqrt()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tuple serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl Index<usize> for MatrixTuple {
    type Output = SymMatrix;
    fn index(&self, l: usize) -> &SymMatrix {
        &self.entries[l]
    }
}

impl std::fmt::Debug for MatrixTuple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MatrixTuple").field("n", &self.n).field("entries", &self.entries).finish()
    }
}

/// Defining tuple `A` of the monic pencil `L_A(x) = I − Σ Aₗxₗ`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TupleJson", into = "TupleJson")]
pub struct LinearPencil {
    d: usize,
    matrices: Vec<SymMatrix>,
}

impl TryFrom<TupleJson> for LinearPencil {
    type Error = FexError;
    fn try_from(j: TupleJson) -> Result<Self> {
        let d = j.d.ok_or_else(|| FexError::Parse("pencil needs field \"d\"".into()))?;
        LinearPencil::with_order(d, parse_matrices(j.g, d, j.matrices)?)
    }
}

impl From<LinearPencil> for TupleJson {
    fn from(p: LinearPencil) -> Self {
        TupleJson { g: p.g(), n: None, d: Some(p.d), matrices: p.matrices.into_iter().map(|m| m.into_matrix().into_data()).collect() }
    }
}

impl LinearPencil {
    pub fn new(matrices: Vec<SymMatrix>) -> Result<Self> {
        let d = matrices.first().map(|m| m.order()).ok_or_else(|| FexError::Shape("empty pencil".into()))?;
        LinearPencil::with_order(d, matrices)
    }

    /// Allows `g = 0` (an empty companion tuple of a drop).
    pub fn with_order(d: usize, matrices: Vec<SymMatrix>) -> Result<Self> {
        if d == 0 {
            return Err(FexError::Shape("pencil order must be positive".into()));
        }
        if matrices.iter().any(|m| m.order() != d) {
            return Err(FexError::Shape("pencil matrices must share one order".into()));
        }
        Ok(LinearPencil { d, matrices })
    }

    pub fn g(&self) -> usize {
        self.matrices.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn matrices(&self) -> &[SymMatrix] {
        &self.matrices
    }

    /// `A = (diag(1, −1))`, whose free spectrahedron is `{‖X‖ ≤ 1}`.
    pub fn interval() -> Self {
        LinearPencil { d: 2, matrices: vec![SymMatrix::diag(&[1.0, -1.0])] }
    }

    /// The free cube `{‖Xₗ‖ ≤ 1 for all ℓ}` as a pencil of order `2g`.
    pub fn cube(g: usize) -> Self {
        let d = 2 * g;
        let matrices = (0..g)
            .map(|l| {
                let mut v = vec![0.0; d];
                v[2 * l] = 1.0;
                v[2 * l + 1] = -1.0;
                SymMatrix::diag(&v)
            })
            .collect();
        LinearPencil { d, matrices }
    }

    /// `Σ Aₗ ⊗ Mₗ` for rectangular `Mₗ` of a common shape.
    pub fn lambda_rect(&self, m: &[Matrix]) -> Matrix {
        assert_eq!(m.len(), self.g());
        let (r, c) = m.first().map(|x| (x.rows(), x.cols())).unwrap_or((0, 0));
        let mut out = Matrix::zeros(self.d * r, self.d * c);
        for (a, x) in self.matrices.iter().zip(m) {
            for i in 0..self.d {
                for j in 0..self.d {
                    let aij = a[(i, j)];
                    if aij == 0.0 {
                        continue;
                    }
                    for k in 0..r {
                        for l in 0..c {
                            out[(i * r + k, j * c + l)] += aij * x[(k, l)];
                        }
                    }
                }
            }
        }
        out
    }

    /// `Σ cₗAₗ` for scalars `c`.
    pub fn combine(&self, c: &[f64]) -> SymMatrix {
        let mut out = SymMatrix::zeros(self.d);
        for (a, v) in self.matrices.iter().zip(c) {
            if *v != 0.0 {
                out.add_scaled(a, *v);
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("pencil serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl std::fmt::Debug for LinearPencil {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearPencil").field("d", &self.d).field("matrices", &self.matrices).finish()
    }
}
