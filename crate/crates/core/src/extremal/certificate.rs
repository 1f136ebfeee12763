use serde::{Deserialize, Serialize};

use crate::error::{FexError, Result};
use crate::linalg::Matrix;
use crate::generalized::{generalized_membership, GeneralizedOracle, TruncatedCompactPencil, DEFAULT_N};
use crate::pencil::{membership, LinearPencil, MatrixTuple, MembershipVerdict, FEAS_TOL};
use crate::spectrahedrop::{drop_membership, DropDescription, DropOracle, LIFT_FEAS_TOL};

use super::{arveson_dilate, irreducible_decomposition, BodyKind, symmetric_commutant, ConvexBodyOracle, DilationStep, PencilOracle, KERNEL_TOL};

/// Serializable description of a convex body; enough to rebuild its oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BodySpec {
    Spectrahedron { pencil: LinearPencil },
    Spectrahedrop { drop: DropDescription },
    Generalized { pencil: TruncatedCompactPencil },
}

impl BodySpec {
    /// Parses a set description, detecting its kind from the JSON shape:
    /// `{"kind": …}` is tagged, `{"A", "B"}` is a drop, `{"type": …}` a
    /// generator (`N` defaults to [`DEFAULT_N`]) and `{"d", "matrices"}` a
    /// pencil. `truncation` overrides the order of a generator.
    pub fn detect(text: &str, truncation: Option<usize>) -> Result<Self> {
        let mut v: serde_json::Value = serde_json::from_str(text)?;
        let obj = v.as_object_mut().ok_or_else(|| FexError::Parse("set description must be a JSON object".into()))?;
        let spec = if obj.contains_key("kind") {
            serde_json::from_value::<BodySpec>(v)?
        } else if obj.contains_key("A") {
            BodySpec::Spectrahedrop { drop: DropDescription::from_json(&v.to_string())? }
        } else if obj.contains_key("type") {
            obj.entry("N").or_insert(DEFAULT_N.into());
            BodySpec::Generalized { pencil: TruncatedCompactPencil::from_json(&v.to_string())? }
        } else if obj.contains_key("matrices") {
            BodySpec::Spectrahedron { pencil: LinearPencil::from_json(&v.to_string())? }
        } else {
            return Err(FexError::Parse("unrecognized set description (expected a pencil, a drop or a generator)".into()));
        };
        match (spec, truncation) {
            (BodySpec::Generalized { pencil }, Some(n)) => Ok(BodySpec::Generalized { pencil: pencil.with_order(n)? }),
            (_, Some(_)) => Err(FexError::Precondition("a truncation order applies to generators only".into())),
            (spec, None) => Ok(spec),
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            BodySpec::Spectrahedron { pencil } => pencil.g(),
            BodySpec::Spectrahedrop { drop } => drop.g(),
            BodySpec::Generalized { pencil } => pencil.g(),
        }
    }

    pub fn kind(&self) -> BodyKind {
        match self {
            BodySpec::Spectrahedron { .. } => BodyKind::Spectrahedron,
            BodySpec::Spectrahedrop { .. } => BodyKind::Spectrahedrop,
            BodySpec::Generalized { .. } => BodyKind::Generalized,
        }
    }

    /// Default feasibility tolerance of the kind.
    pub fn default_tol(&self) -> f64 {
        match self {
            BodySpec::Spectrahedrop { .. } => LIFT_FEAS_TOL,
            _ => FEAS_TOL,
        }
    }

    /// Membership with the verdict semantics of the kind: eigenvalue test
    /// for pencils, lifted SDP for drops, certified surrogates (possibly
    /// `Undecided`) for generators.
    pub fn membership(&self, x: &MatrixTuple, tol: f64) -> Result<MembershipVerdict> {
        if self.arity() != x.g() {
            return Err(FexError::Shape(format!("set has g = {}, tuple has g = {}", self.arity(), x.g())));
        }
        match self {
            BodySpec::Spectrahedron { pencil } => membership(pencil, x, tol),
            BodySpec::Spectrahedrop { drop } => drop_membership(drop, x, tol),
            BodySpec::Generalized { pencil } => generalized_membership(pencil, x, tol),
        }
    }
}

pub fn oracle_for(spec: &BodySpec) -> Result<Box<dyn ConvexBodyOracle>> {
    match spec {
        BodySpec::Spectrahedron { pencil } => Ok(Box::new(PencilOracle::new(pencil.clone())?)),
        BodySpec::Spectrahedrop { drop } => Ok(Box::new(DropOracle::new(drop.clone())?)),
        BodySpec::Generalized { pencil } => Ok(Box::new(GeneralizedOracle::new(pencil.clone())?)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative kernel tolerance behind every "Arveson" decision.
    pub kernel: f64,
    pub membership: f64,
    /// Relative to `1 + ‖X‖_F`.
    pub reconstruction: f64,
    pub partition: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { kernel: KERNEL_TOL, membership: 1e-7, reconstruction: 1e-6, partition: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRecord {
    pub tuple: MatrixTuple,
    /// `Vᵢ`, of shape `nᵢ × n`.
    pub isometry: Matrix,
    pub margin: f64,
    pub dilation_dim: usize,
    pub commutant_dim: usize,
}

/// `X = Σ Vᵢ* Xⁱ Vᵢ` with `Σ Vᵢ*Vᵢ = I` and every `Xⁱ` free extreme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionCertificate {
    pub body: BodySpec,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub input: MatrixTuple,
    /// The Arveson dilation `Y` of order `n + k`.
    pub dilation: MatrixTuple,
    pub steps: Vec<DilationStep>,
    pub components: Vec<ComponentRecord>,
    pub reconstruction_residual: f64,
    pub partition_residual: f64,
    /// `‖PᵀYP − X‖_F` for the canonical embedding `P`.
    pub compression_residual: f64,
    pub total_size: usize,
    pub size_bound: usize,
}

impl DecompositionCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn partition_residual(n: usize, isometries: &[&Matrix]) -> Result<f64> {
    let mut s = Matrix::identity(n).scale(-1.0);
    for v in isometries {
        if v.cols() != n {
            return Err(FexError::Shape(format!("isometry has {} columns, expected {n}", v.cols())));
        }
        s.add_scaled(&v.tr_matmul(v), 1.0);
    }
    Ok(s.frobenius_norm())
}

fn reconstruction_residual(x: &MatrixTuple, parts: &[(&MatrixTuple, &Matrix)]) -> Result<f64> {
    let mut total = 0.0;
    for l in 0..x.g() {
        let mut s = x[l].as_matrix().scale(-1.0);
        for (t, v) in parts {
            if t.g() != x.g() || v.rows() != t.n() || v.cols() != x.n() {
                return Err(FexError::Shape("component does not match its isometry".into()));
            }
            s.add_scaled(&t[l].congruence(v), 1.0);
        }
        total += s.dot(&s);
    }
    Ok(total.sqrt())
}

/// Arveson dilation, irreducible splitting and the resulting certificate.
pub fn decompose_free_extreme<K: ConvexBodyOracle + ?Sized>(k: &K, x: &MatrixTuple, seed: u64, tol: &Tolerances) -> Result<DecompositionCertificate> {
    let (y, steps) = arveson_dilate(k, x, seed)?;
    let n = x.n();
    let g = x.g();
    let comps = irreducible_decomposition(&y, crate::random::sub_seed(seed, 9_999))?;
    let mut components = Vec::with_capacity(comps.len());
    for c in comps {
        // Vᵢ = Qᵢ* P with P the embedding of ℝⁿ as the leading coordinates.
        let v = c.embedding.submatrix(0, 0, n, c.embedding.cols()).transpose();
        if v.frobenius_norm() <= 1e-12 {
            continue;
        }
        let margin = k.membership(&c.tuple)?.margin;
        let dilation_dim = k.dilation_subspace(&c.tuple)?.cols();
        components.push(ComponentRecord { tuple: c.tuple, isometry: v, margin, dilation_dim, commutant_dim: c.commutant_dim });
    }
    let isos: Vec<&Matrix> = components.iter().map(|c| &c.isometry).collect();
    let partition = partition_residual(n, &isos)?;
    let parts: Vec<(&MatrixTuple, &Matrix)> = components.iter().map(|c| (&c.tuple, &c.isometry)).collect();
    let reconstruction = reconstruction_residual(x, &parts)?;
    let p = Matrix::identity(y.n()).submatrix(0, 0, y.n(), n);
    let compression = y.congruence(&p).sub(x).frobenius_norm();
    let total_size = components.iter().map(|c| c.tuple.n()).sum();
    Ok(DecompositionCertificate {
        body: k.describe(),
        seed,
        tolerances: *tol,
        input: x.clone(),
        dilation: y,
        steps,
        components,
        reconstruction_residual: reconstruction,
        partition_residual: partition,
        compression_residual: compression,
        total_size,
        size_bound: n * (g + 1),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn first_failure(&self) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| !c.passed)
    }
}

/// Recomputes every claim of a certificate from its stored data.
pub fn verify_certificate(cert: &DecompositionCertificate) -> Result<VerifyReport> {
    let tol = &cert.tolerances;
    let x = &cert.input;
    let n = x.n();
    let g = x.g();
    let mut checks = Vec::new();

    let shapes_ok = cert
        .components
        .iter()
        .all(|c| c.tuple.g() == g && c.isometry.rows() == c.tuple.n() && c.isometry.cols() == n);
    push(&mut checks, "shape", shapes_ok, format!("{} components", cert.components.len()));
    if !shapes_ok {
        return Ok(VerifyReport { passed: false, checks });
    }

    let isos: Vec<&Matrix> = cert.components.iter().map(|c| &c.isometry).collect();
    let part = partition_residual(n, &isos)?;
    push(&mut checks, "partition", part <= tol.partition, format!("‖ΣVᵢ*Vᵢ − I‖_F = {part:.3e} (limit {:.1e})", tol.partition));

    let oracle = oracle_for(&cert.body)?;
    let mut worst = f64::INFINITY;
    let mut dims = Vec::new();
    let mut comms = Vec::new();
    for c in &cert.components {
        worst = worst.min(oracle.membership(&c.tuple)?.margin);
    }
    push(&mut checks, "membership", worst >= -tol.membership, format!("worst margin {worst:.3e} (limit −{:.1e})", tol.membership));
    if worst < -tol.membership {
        // Dilation subspaces are only defined for members.
        return Ok(VerifyReport { passed: false, checks });
    }
    for c in &cert.components {
        dims.push(oracle.dilation_subspace(&c.tuple)?.cols());
    }
    push(&mut checks, "dilation_dimension", dims.iter().all(|&d| d == 0), format!("dimensions {dims:?}"));
    for c in &cert.components {
        comms.push(symmetric_commutant(&c.tuple)?.len());
    }
    push(&mut checks, "commutant", comms.iter().all(|&d| d == 1), format!("dimensions {comms:?}"));

    let total: usize = cert.components.iter().map(|c| c.tuple.n()).sum();
    let k = cert.steps.len();
    let size_ok = total <= n + k && n + k <= n * (g + 1) && k <= n * g;
    push(&mut checks, "size_bound", size_ok, format!("Σnᵢ = {total}, n + k = {}, n(g+1) = {}", n + k, n * (g + 1)));

    let parts: Vec<(&MatrixTuple, &Matrix)> = cert.components.iter().map(|c| (&c.tuple, &c.isometry)).collect();
    let rec = reconstruction_residual(x, &parts)?;
    let limit = tol.reconstruction * (1.0 + x.frobenius_norm());
    push(&mut checks, "reconstruction", rec <= limit, format!("‖X − ΣVᵢ*XⁱVᵢ‖_F = {rec:.3e} (limit {limit:.1e})"));

    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { passed, checks })
}

fn push(checks: &mut Vec<CheckOutcome>, name: &str, passed: bool, detail: String) {
    checks.push(CheckOutcome { name: name.into(), passed, detail });
}
