use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fex_core::extremal::DecompositionCertificate;
use fex_core::generalized::notadrop_example;
use fex_core::pencil::{LinearPencil, MatrixTuple};
use fex_core::spectrahedrop::DropDescription;
use serde_json::Value;
use tempfile::TempDir;

fn fex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fex")).args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn cube_member() -> MatrixTuple {
    let x1 = [0.5, 0.2, 0.0, 0.2, -0.3, 0.1, 0.0, 0.1, 0.4];
    let x2 = [-0.2, 0.0, 0.3, 0.0, 0.6, -0.1, 0.3, -0.1, 0.1];
    MatrixTuple::from_json(&format!(r#"{{"g":2,"n":3,"matrices":[{x1:?},{x2:?}]}}"#)).unwrap()
}

#[test]
fn interval_origin_is_inside() {
    let dir = TempDir::new().unwrap();
    let set = write(&dir, "set.json", &LinearPencil::interval().to_json());
    let x = write(&dir, "x.json", &MatrixTuple::from_scalars(&[0.0]).to_json());
    let o = fex(&["membership", s(&set), s(&x), "--seed", "17"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["inside"], Value::Bool(true));
    assert_eq!(v["seed"], 17);
}

#[test]
fn disc_drop_outside_has_witness() {
    let dir = TempDir::new().unwrap();
    let set = write(&dir, "drop.json", &DropDescription::disc().to_json());
    let x = write(&dir, "x.json", &MatrixTuple::from_scalars(&[1.1]).to_json());
    let o = fex(&["membership", s(&set), s(&x), "--quiet"]);
    assert_eq!(o.status.code(), Some(3));
    let v = stdout_json(&o);
    assert_eq!(v["body"], "spectrahedrop");
    assert!(v["dnt_witness"]["gram_violation"].as_f64().unwrap() <= -1e-4);
}

#[test]
fn generalized_small_truncation_is_undecided() {
    let dir = TempDir::new().unwrap();
    let set = write(&dir, "gen.json", &notadrop_example(16).unwrap().to_json());
    let x = write(&dir, "x.json", &MatrixTuple::from_scalars(&[0.92, 0.0]).to_json());
    let o = fex(&["membership", s(&set), s(&x), "--truncation-N", "4"]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(stdout_json(&o)["truncation_N"], 4);
    let o = fex(&["membership", s(&set), s(&x), "--truncation-N", "4", "--refine"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn decompose_then_verify_in_a_separate_process() {
    let dir = TempDir::new().unwrap();
    let set = write(&dir, "cube.json", &LinearPencil::cube(2).to_json());
    let x = write(&dir, "x.json", &cube_member().to_json());
    let cert_path = dir.path().join("cert.json");
    let o = fex(&["decompose", s(&set), s(&x), "--seed", "5", "--out", s(&cert_path)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let cert = DecompositionCertificate::from_json(&fs::read_to_string(&cert_path).unwrap()).unwrap();
    assert_eq!(cert.seed, 5);
    assert!(cert.total_size <= 9);
    let o = fex(&["verify", s(&cert_path)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout_json(&o)["passed"], Value::Bool(true));
}

#[test]
fn free_extreme_input_has_one_component() {
    let dir = TempDir::new().unwrap();
    let set = write(&dir, "cube.json", &LinearPencil::cube(2).to_json());
    let x = write(&dir, "x.json", &MatrixTuple::from_scalars(&[1.0, -1.0]).to_json());
    let o = fex(&["decompose", s(&set), s(&x)]);
    assert_eq!(o.status.code(), Some(0));
    let cert = DecompositionCertificate::from_json(std::str::from_utf8(&o.stdout).unwrap()).unwrap();
    assert_eq!(cert.components.len(), 1);
    assert!(cert.steps.is_empty());
}

#[test]
fn non_member_decomposition_exits_three() {
    let dir = TempDir::new().unwrap();
    let set = write(&dir, "cube.json", &LinearPencil::cube(2).to_json());
    let x = write(&dir, "x.json", &MatrixTuple::from_scalars(&[1.5, 0.0]).to_json());
    assert_eq!(fex(&["decompose", s(&set), s(&x)]).status.code(), Some(3));
}

fn tampered(edit: impl Fn(&mut DecompositionCertificate)) -> Output {
    let dir = TempDir::new().unwrap();
    let set = write(&dir, "cube.json", &LinearPencil::cube(2).to_json());
    let x = write(&dir, "x.json", &cube_member().to_json());
    let o = fex(&["decompose", s(&set), s(&x), "--seed", "2"]);
    let mut cert = DecompositionCertificate::from_json(std::str::from_utf8(&o.stdout).unwrap()).unwrap();
    edit(&mut cert);
    let p = write(&dir, "bad.json", &cert.to_json());
    fex(&["verify", s(&p)])
}

#[test]
fn tampered_isometry_fails_partition() {
    let o = tampered(|c| c.components[0].isometry = c.components[0].isometry.scale(1.01));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`partition`"));
}

#[test]
fn tampered_component_fails_membership() {
    let o = tampered(|c| c.components[0].tuple = c.components[0].tuple.scale(1.5));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`membership`"));
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let set = write(&dir, "drop.json", &DropDescription::disc().to_json());
    let x = write(&dir, "x.json", r#"{"g":1,"n":2,"matrices":[[0.3,0.2,0.2,-0.4]]}"#);
    let a = fex(&["decompose", s(&set), s(&x), "--seed", "9"]);
    let b = fex(&["decompose", s(&set), s(&x), "--seed", "9"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn bad_inputs_exit_two() {
    let dir = TempDir::new().unwrap();
    let set = write(&dir, "cube.json", &LinearPencil::cube(2).to_json());
    let garbage = write(&dir, "x.json", "{not json");
    assert_eq!(fex(&["membership", s(&set), s(&garbage)]).status.code(), Some(2));
    let wrong_g = write(&dir, "y.json", &MatrixTuple::from_scalars(&[0.0]).to_json());
    assert_eq!(fex(&["membership", s(&set), s(&wrong_g)]).status.code(), Some(2));
    assert_eq!(fex(&["membership", s(&set), "/nonexistent.json"]).status.code(), Some(2));
    let unknown = write(&dir, "z.json", r#"{"foo": 1}"#);
    assert_eq!(fex(&["membership", s(&unknown), s(&wrong_g)]).status.code(), Some(2));
}

#[test]
fn demos() {
    let o = fex(&["demo", "interval"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("0.5000·(-1.0000)") && text.contains("0.5000·(+1.0000)"), "{text}");
    let dir = TempDir::new().unwrap();
    let o = fex(&["demo", "notadrop", "--out", s(dir.path()), "--quiet"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let artifact: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("notadrop.json")).unwrap()).unwrap();
    assert_eq!(artifact["seed"], 0);
    assert_eq!(fex(&["demo", "nonsense"]).status.code(), Some(2));
}
