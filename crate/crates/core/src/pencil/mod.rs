//! Monic linear pencils, their evaluations and free spectrahedron membership.

mod tuple;

use serde::{Deserialize, Serialize};

use crate::error::{FexError, Result};
use crate::linalg::{sym_eigen, Matrix, SymMatrix};
use crate::random;
use crate::sdp::{feasible_point, solve, LmiBlock, SdpProblem, SdpSettings, SdpStatus};

pub use tuple::{LinearPencil, MatrixTuple};

/// Default tolerance for PSD decisions.
pub const FEAS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Certainty {
    CertifiedIn,
    CertifiedOut,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Witness {
    /// Eigenvector for the smallest eigenvalue of the evaluated pencil.
    Eigenvector(Vec<f64>),
    /// A lift `Y` with `L_{(A,B)}(X, Y) ⪰ −tol·I`.
    Lift(MatrixTuple),
    /// Dual certificate `Z ⪰ 0`, `tr Z = 1`, orthogonal to every lift
    /// direction, with `⟨Z, L_A(X)⟩ < 0`.
    Dual(SymMatrix),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub inside: bool,
    pub margin: f64,
    pub certainty: Certainty,
    pub witness: Option<Witness>,
}

impl MembershipVerdict {
    pub fn from_margin(margin: f64, tol: f64, witness: Option<Witness>) -> Self {
        let inside = margin >= -tol;
        let certainty = if inside { Certainty::CertifiedIn } else { Certainty::CertifiedOut };
        MembershipVerdict { inside, margin, certainty, witness }
    }
}

fn check_arity(a: &LinearPencil, x: &MatrixTuple) -> Result<()> {
    if a.g() != x.g() {
        return Err(FexError::Shape(format!("pencil has g = {}, tuple has g = {}", a.g(), x.g())));
    }
    Ok(())
}

/// `Λ_A(X) = Σ Aₗ ⊗ Xₗ`.
pub fn eval_lambda(a: &LinearPencil, x: &MatrixTuple) -> Result<SymMatrix> {
    check_arity(a, x)?;
    let m: Vec<Matrix> = x.entries().iter().map(|e| e.as_matrix().clone()).collect();
    SymMatrix::from_lower(a.lambda_rect(&m))
}

/// `L_A(X) = I_{dn} − Σ Aₗ ⊗ Xₗ`.
pub fn eval_l(a: &LinearPencil, x: &MatrixTuple) -> Result<SymMatrix> {
    let lam = eval_lambda(a, x)?;
    Ok(SymMatrix::identity(lam.order()).sub(&lam))
}

/// Membership in the free spectrahedron `D_A`; the margin is the smallest
/// eigenvalue of `L_A(X)`.
pub fn membership(a: &LinearPencil, x: &MatrixTuple, tol: f64) -> Result<MembershipVerdict> {
    let l = eval_l(a, x)?;
    let e = sym_eigen(&l)?;
    let last = e.values.len() - 1;
    Ok(MembershipVerdict::from_margin(e.min(), tol, Some(Witness::Eigenvector(e.vector(last)))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Boundedness {
    Bounded,
    /// Nonzero direction `δ` of the level-one recession cone.
    UnboundedWitness(Vec<f64>),
    Inconclusive,
}

/// Randomized boundedness test on the level-one recession cone
/// `{δ : Λ_A(δ) ⪯ 0}`.
pub fn is_bounded(a: &LinearPencil, trials: usize, seed: u64) -> Result<Boundedness> {
    recession_test(a.matrices(), a.g(), trials, seed)
}

/// Recession test for the projection onto the first `gx` coordinates of the
/// set `{z : I − Σ zᵢMᵢ ⪰ 0}`: for random unit `c` (both signs), decides
/// whether `{δ : Σ δᵢMᵢ ⪯ 0, ⟨c, δ_x⟩ = 1}` is empty via a dual certificate.
pub fn recession_test(mats: &[SymMatrix], gx: usize, trials: usize, seed: u64) -> Result<Boundedness> {
    if gx == 0 {
        return Ok(Boundedness::Bounded);
    }
    let d = mats[0].order();
    let total = mats.len();
    let mut rng = random::rng(seed);
    let settings = SdpSettings::default();
    for _ in 0..trials.max(1) {
        let c = random::unit_vector(&mut rng, gx);
        for sign in [1.0, -1.0] {
            let c: Vec<f64> = c.iter().map(|v| sign * v).collect();
            // δ_x = c + N w with N an orthonormal basis of c^⊥; δ_y free.
            let cm = Matrix::from_columns(gx, &[c.clone()]);
            let n = crate::linalg::decomp::orthonormal_complement(&cm)?;
            let nv = n.cols() + (total - gx);
            let mut f0 = SymMatrix::zeros(d);
            for i in 0..gx {
                f0.add_scaled(&mats[i], -c[i]);
            }
            let mut block = LmiBlock::new(f0);
            for j in 0..n.cols() {
                let mut f = SymMatrix::zeros(d);
                for i in 0..gx {
                    f.add_scaled(&mats[i], -n[(i, j)]);
                }
                block.push_term(j, f);
            }
            for k in gx..total {
                block.push_term(n.cols() + k - gx, mats[k].scale(-1.0));
            }
            let mut p = SdpProblem::new(nv).with_bound(1e3);
            p.add_block(block);
            let r = feasible_point(&p, &settings)?;
            match r.status {
                SdpStatus::Infeasible => {}
                SdpStatus::Optimal => {
                    let mut delta = c.clone();
                    let nw = n.matvec(&r.y[..n.cols()]);
                    for (a, b) in delta.iter_mut().zip(nw) {
                        *a += b;
                    }
                    return Ok(Boundedness::UnboundedWitness(delta));
                }
                SdpStatus::NumericalFailure => return Ok(Boundedness::Inconclusive),
            }
        }
    }
    Ok(Boundedness::Bounded)
}

/// `max |xₗ|` over the level-one set `{x : I − Σ xₗAₗ ⪰ 0}`; bounds the
/// operator norm of every entry of every member tuple.
pub fn level1_radius(a: &LinearPencil) -> Result<f64> {
    let g = a.g();
    let mut radius: f64 = 0.0;
    for l in 0..g {
        for sign in [1.0, -1.0] {
            let mut c = vec![0.0; g];
            c[l] = sign;
            let mut block = LmiBlock::new(SymMatrix::identity(a.d()));
            for (i, m) in a.matrices().iter().enumerate() {
                block.push_term(i, m.scale(-1.0));
            }
            let mut p = SdpProblem::new(g).with_objective(c).with_bound(1e4);
            p.add_block(block);
            let r = solve(&p, &SdpSettings::default())?;
            if r.status != SdpStatus::Optimal {
                return Err(FexError::NumericalFailure("radius estimate failed".into()));
            }
            radius = radius.max(r.value.abs()).max(r.dual_bound.abs().min(1e4));
        }
    }
    Ok(radius)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_at_zero_is_identity() {
        let a = LinearPencil::cube(2);
        let l = eval_l(&a, &MatrixTuple::zeros(2, 3)).unwrap();
        assert_eq!(l.as_matrix(), &Matrix::identity(12));
    }

    #[test]
    fn interval_eval() {
        let l = eval_l(&LinearPencil::interval(), &MatrixTuple::from_scalars(&[0.3])).unwrap();
        assert_eq!(l.as_matrix(), &Matrix::diag(&[0.7, 1.3]));
    }

    #[test]
    fn lambda_at_unit_coordinate() {
        let a = LinearPencil::cube(2);
        let x = MatrixTuple::new(vec![SymMatrix::identity(2), SymMatrix::zeros(2)]).unwrap();
        let lam = eval_lambda(&a, &x).unwrap();
        let expected = crate::linalg::kron(a.matrices()[0].as_matrix(), &Matrix::identity(2));
        assert_eq!(lam.as_matrix(), &expected);
    }

    #[test]
    fn interval_membership_examples() {
        let a = LinearPencil::interval();
        let v = membership(&a, &MatrixTuple::from_scalars(&[0.5]), FEAS_TOL).unwrap();
        assert!(v.inside && (v.margin - 0.5).abs() < 1e-15);
        let v = membership(&a, &MatrixTuple::from_scalars(&[1.0]), FEAS_TOL).unwrap();
        assert!(v.inside && v.margin.abs() < 1e-15);
        let v = membership(&a, &MatrixTuple::from_scalars(&[0.0]), FEAS_TOL).unwrap();
        assert!(v.inside && (v.margin - 1.0).abs() < 1e-15);
    }

    #[test]
    fn arity_mismatch_is_shape_error() {
        let r = eval_l(&LinearPencil::interval(), &MatrixTuple::zeros(2, 1));
        assert!(matches!(r, Err(FexError::Shape(_))));
    }

    #[test]
    fn boundedness_examples() {
        assert_eq!(is_bounded(&LinearPencil::interval(), 4, 1).unwrap(), Boundedness::Bounded);
        assert_eq!(is_bounded(&LinearPencil::cube(2), 4, 1).unwrap(), Boundedness::Bounded);
        let half = LinearPencil::new(vec![SymMatrix::identity(1)]).unwrap();
        match is_bounded(&half, 4, 1).unwrap() {
            Boundedness::UnboundedWitness(d) => assert!((d[0] + 1.0).abs() < 1e-6),
            other => panic!("expected witness, got {other:?}"),
        }
    }

    #[test]
    fn radius_of_cube() {
        assert!((level1_radius(&LinearPencil::cube(2)).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn json_round_trip() {
        let a = LinearPencil::cube(2);
        assert_eq!(LinearPencil::from_json(&a.to_json()).unwrap(), a);
        let x = MatrixTuple::from_scalars(&[0.25, -0.5]);
        assert_eq!(MatrixTuple::from_json(&x.to_json()).unwrap(), x);
        assert!(LinearPencil::from_json(r#"{"g":1,"d":2,"matrices":[[1,2,3,4]]}"#).is_err());
    }
}
