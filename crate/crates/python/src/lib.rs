//! Python bindings. Sets, tuples and certificates cross the boundary as
//! JSON strings in the same formats the `fex` binary reads and writes.

use fex_core::extremal::{decompose_free_extreme, oracle_for, verify_certificate, BodySpec, DecompositionCertificate, Tolerances};
use fex_core::generalized::notadrop_example;
use fex_core::pencil::{LinearPencil, MatrixTuple};
use fex_core::spectrahedrop::DropDescription;
use fex_core::FexError;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: FexError) -> PyErr {
    match e {
        FexError::Parse(_) | FexError::Shape(_) | FexError::Domain(_) | FexError::Precondition(_) | FexError::NotMember { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_json<T: serde::Serialize>(t: &T) -> PyResult<String> {
    serde_json::to_string(t).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

fn parse(set_json: &str, tuple_json: &str, truncation_n: Option<usize>) -> PyResult<(BodySpec, MatrixTuple)> {
    let spec = BodySpec::detect(set_json, truncation_n).map_err(py_err)?;
    let x = MatrixTuple::from_json(tuple_json).map_err(py_err)?;
    Ok((spec, x))
}

/// Membership verdict as JSON (`inside`, `margin`, `certainty`, `witness`).
#[pyfunction]
#[pyo3(signature = (set_json, tuple_json, tol=None, truncation_n=None))]
fn membership(set_json: &str, tuple_json: &str, tol: Option<f64>, truncation_n: Option<usize>) -> PyResult<String> {
    let (spec, x) = parse(set_json, tuple_json, truncation_n)?;
    let verdict = spec.membership(&x, tol.unwrap_or(spec.default_tol())).map_err(py_err)?;
    to_json(&verdict)
}

/// Decomposition certificate as JSON.
#[pyfunction]
#[pyo3(signature = (set_json, tuple_json, seed=0, truncation_n=None))]
fn decompose(py: Python<'_>, set_json: &str, tuple_json: &str, seed: u64, truncation_n: Option<usize>) -> PyResult<String> {
    let (spec, x) = parse(set_json, tuple_json, truncation_n)?;
    let cert = py
        .detach(|| {
            let oracle = oracle_for(&spec)?;
            decompose_free_extreme(oracle.as_ref(), &x, seed, &Tolerances::default())
        })
        .map_err(py_err)?;
    Ok(cert.to_json())
}

/// Verification report as JSON (`passed`, `checks`).
#[pyfunction]
fn verify(certificate_json: &str) -> PyResult<String> {
    let cert = DecompositionCertificate::from_json(certificate_json).map_err(py_err)?;
    to_json(&verify_certificate(&cert).map_err(py_err)?)
}

#[pyfunction]
fn interval() -> String {
    LinearPencil::interval().to_json()
}

#[pyfunction]
fn cube(g: usize) -> PyResult<String> {
    if g == 0 {
        return Err(PyValueError::new_err("g must be positive"));
    }
    Ok(LinearPencil::cube(g).to_json())
}

#[pyfunction]
fn disc_drop() -> String {
    DropDescription::disc().to_json()
}

/// Generator JSON of the weighted shift example at truncation order `n`.
#[pyfunction]
#[pyo3(signature = (n=16))]
fn notadrop(n: usize) -> PyResult<String> {
    Ok(notadrop_example(n).map_err(py_err)?.to_json())
}

#[pymodule]
fn fex(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(membership, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(interval, m)?)?;
    m.add_function(wrap_pyfunction!(cube, m)?)?;
    m.add_function(wrap_pyfunction!(disc_drop, m)?)?;
    m.add_function(wrap_pyfunction!(notadrop, m)?)?;
    Ok(())
}
