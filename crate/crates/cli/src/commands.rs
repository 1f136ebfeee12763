use std::fs;
use std::io::{self, Write};
use std::path::Path;

use fex_core::extremal::{decompose_free_extreme, oracle_for, verify_certificate, BodySpec, DecompositionCertificate, Tolerances};
use fex_core::generalized::generalized_membership_refined;
use fex_core::pencil::{Certainty, MatrixTuple};
use fex_core::spectrahedrop::dnt_violating_witness;
use fex_core::FexError;
use serde_json::{json, Value};

use crate::error::{exit, CliError};

pub fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|source| CliError::Io { path: p.display().to_string(), source }),
        None => match writeln!(io::stdout().lock(), "{text}") {
            Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(CliError::Io { path: "<stdout>".into(), source: e }),
            _ => Ok(()),
        },
    }
}

pub fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON value serializes")
}

/// Verdict JSON and the exit code it maps to.
pub fn membership(spec: &BodySpec, x: &MatrixTuple, tol: Option<f64>, seed: u64, refine: bool) -> Result<(Value, i32), CliError> {
    let tol = tol.unwrap_or(spec.default_tol());
    let mut out = json!({ "seed": seed, "body": to_value(spec.kind())?, "n": x.n(), "tolerance": tol });
    let verdict = match spec {
        BodySpec::Generalized { pencil } if refine => {
            if pencil.g() != x.g() {
                return Err(FexError::Shape(format!("set has g = {}, tuple has g = {}", pencil.g(), x.g())).into());
            }
            let (v, used) = generalized_membership_refined(pencil, x, tol)?;
            out["truncation_N"] = json!(used.order());
            out["tail_bound"] = json!(used.tail_bound());
            v
        }
        _ => spec.membership(x, tol)?,
    };
    match spec {
        BodySpec::Generalized { pencil } if !refine => {
            out["truncation_N"] = json!(pencil.order());
            out["tail_bound"] = json!(pencil.tail_bound());
        }
        BodySpec::Spectrahedrop { drop } if !verdict.inside => match dnt_violating_witness(drop, x) {
            Ok(w) => out["dnt_witness"] = to_value(&w)?,
            Err(e) => out["dnt_witness_error"] = json!(e.to_string()),
        },
        _ => {}
    }
    out["inside"] = json!(verdict.inside);
    out["certainty"] = to_value(verdict.certainty)?;
    out["margin"] = json!(verdict.margin);
    out["witness"] = to_value(&verdict.witness)?;
    let code = match verdict.certainty {
        Certainty::CertifiedIn => exit::OK,
        Certainty::CertifiedOut => exit::OUTSIDE,
        Certainty::Undecided => exit::UNDECIDED,
    };
    Ok((out, code))
}

fn to_value<T: serde::Serialize>(t: T) -> Result<Value, CliError> {
    serde_json::to_value(t).map_err(|e| CliError::Core(e.into()))
}

pub fn tolerances(tol: Option<f64>) -> Tolerances {
    let mut t = Tolerances::default();
    if let Some(m) = tol {
        t.membership = m;
    }
    t
}

/// Decomposes `x` and re-verifies the result before handing it out.
pub fn decompose(spec: &BodySpec, x: &MatrixTuple, seed: u64, tol: Option<f64>) -> Result<DecompositionCertificate, CliError> {
    if spec.arity() != x.g() {
        return Err(FexError::Shape(format!("set has g = {}, tuple has g = {}", spec.arity(), x.g())).into());
    }
    let oracle = oracle_for(spec)?;
    let cert = decompose_free_extreme(oracle.as_ref(), x, seed, &tolerances(tol))?;
    let report = verify_certificate(&cert)?;
    if let Some(f) = report.first_failure() {
        return Err(CliError::Invariant(format!("fresh certificate fails `{}`: {}", f.name, f.detail)));
    }
    Ok(cert)
}

/// Report JSON; an `Err(Verify)` names the first failed check.
pub fn verify(cert: &DecompositionCertificate) -> Result<Value, CliError> {
    let report = verify_certificate(cert)?;
    let value = json!({
        "seed": cert.seed,
        "passed": report.passed,
        "checks": to_value(&report.checks)?,
    });
    Ok(value)
}

pub fn first_failure(report: &Value) -> Option<CliError> {
    report["checks"].as_array()?.iter().find(|c| c["passed"] == json!(false)).map(|c| CliError::Verify {
        name: c["name"].as_str().unwrap_or_default().to_string(),
        detail: c["detail"].as_str().unwrap_or_default().to_string(),
    })
}
