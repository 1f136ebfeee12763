use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use fex_core::extremal::{BodySpec, DecompositionCertificate};
use fex_core::generalized::{compression_boundedness, finite_interior_witness, notadrop_example, sample_members, GeneralizedOracle};
use fex_core::linalg::{sym_eigen, Matrix, SymMatrix};
use fex_core::pencil::{Boundedness, LinearPencil, MatrixTuple};
use fex_core::random;
use fex_core::spectrahedrop::DropDescription;
use serde_json::json;

use crate::commands::{decompose, membership, pretty};
use crate::error::{exit, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DemoName {
    Interval,
    Cube,
    DiscDrop,
    Notadrop,
}

struct Ctx {
    seed: u64,
    out: Option<PathBuf>,
    quiet: bool,
}

impl Ctx {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            // A closed pipe only ends the walkthrough early.
            let _ = writeln!(io::stdout().lock(), "{}", line.as_ref());
        }
    }

    fn save(&self, name: &str, text: &str) -> Result<(), CliError> {
        if let Some(dir) = &self.out {
            let p = dir.join(name);
            fs::write(&p, format!("{text}\n")).map_err(|source| CliError::Io { path: p.display().to_string(), source })?;
            self.say(format!("  wrote {}", p.display()));
        }
        Ok(())
    }
}

fn ensure(cond: bool, what: &str) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Invariant(what.to_string()))
    }
}

pub fn run(name: DemoName, seed: u64, out: Option<&Path>, quiet: bool) -> Result<(), CliError> {
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.display().to_string(), source })?;
    }
    let ctx = Ctx { seed, out: out.map(Path::to_path_buf), quiet };
    match name {
        DemoName::Interval => interval(&ctx),
        DemoName::Cube => cube(&ctx),
        DemoName::DiscDrop => disc_drop(&ctx),
        DemoName::Notadrop => notadrop(&ctx),
    }
}

fn weight(v: &Matrix) -> f64 {
    v.tr_matmul(v).trace()
}

fn summarize(ctx: &Ctx, cert: &DecompositionCertificate) {
    let n = cert.input.n();
    ctx.say(format!(
        "  {} dilation step(s), {} component(s), Σ sizes = {} (bound n(g+1) = {})",
        cert.steps.len(),
        cert.components.len(),
        cert.total_size,
        cert.size_bound
    ));
    for s in &cert.steps {
        ctx.say(format!("  step at order {}: dilation subspace {} -> {}", s.order, s.dim_before, s.dim_after));
    }
    ctx.say(format!(
        "  residuals: reconstruction {:.2e}, partition {:.2e}, compression {:.2e} (n = {n})",
        cert.reconstruction_residual, cert.partition_residual, cert.compression_residual
    ));
}

fn interval(ctx: &Ctx) -> Result<(), CliError> {
    ctx.say("interval [-1, 1], X = 0");
    let spec = BodySpec::Spectrahedron { pencil: LinearPencil::interval() };
    let cert = decompose(&spec, &MatrixTuple::from_scalars(&[0.0]), ctx.seed, None)?;
    summarize(ctx, &cert);
    let mut terms = Vec::new();
    for c in &cert.components {
        let v = c.tuple[0][(0, 0)];
        ensure(c.tuple.n() == 1 && (v.abs() - 1.0).abs() < 1e-9, "interval components are ±1")?;
        terms.push(format!("{:.4}·({:+.4})", weight(&c.isometry), v));
    }
    ctx.say(format!("  0 = {}", terms.join(" + ")));
    ctx.save("interval-certificate.json", &cert.to_json())
}

fn random_contraction_tuple(seed: u64, g: usize, n: usize) -> Result<MatrixTuple, CliError> {
    let mut rng = random::rng(seed);
    let entries = (0..g)
        .map(|_| {
            let s = random::sym_gaussian(&mut rng, n);
            let rho = sym_eigen(&s)?.spectral_radius().max(1e-12);
            Ok(s.scale(0.9 / rho))
        })
        .collect::<Result<Vec<SymMatrix>, CliError>>()?;
    Ok(MatrixTuple::new(entries)?)
}

fn cube(ctx: &Ctx) -> Result<(), CliError> {
    let x = random_contraction_tuple(ctx.seed, 2, 3)?;
    ctx.say(format!("free cube, g = 2, random member of order 3 (seed {})", ctx.seed));
    let spec = BodySpec::Spectrahedron { pencil: LinearPencil::cube(2) };
    let cert = decompose(&spec, &x, ctx.seed, None)?;
    summarize(ctx, &cert);
    ensure(cert.total_size <= 9, "Σ sizes ≤ n(g+1)")?;
    for (i, c) in cert.components.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for xl in c.tuple.entries() {
            let sq = xl.as_matrix().matmul(xl.as_matrix());
            worst = worst.max((&sq - &Matrix::identity(c.tuple.n())).frobenius_norm());
        }
        ctx.say(format!("  component {i}: order {}, weight {:.4}, max‖Xₗ² − I‖_F = {worst:.2e}", c.tuple.n(), weight(&c.isometry)));
        ensure(worst <= 1e-6, "cube components are symmetries")?;
    }
    ctx.save("cube-certificate.json", &cert.to_json())
}

fn disc_drop(ctx: &Ctx) -> Result<(), CliError> {
    let dd = DropDescription::disc();
    let spec = BodySpec::Spectrahedrop { drop: dd.clone() };
    ctx.say("disc drop: projection of the free disc, X = 0 at level 1");
    let c0 = decompose(&spec, &MatrixTuple::from_scalars(&[0.0]), ctx.seed, None)?;
    summarize(ctx, &c0);
    ensure(c0.total_size <= 2, "Σ sizes ≤ n(g+1)")?;
    ctx.save("disc-drop-origin-certificate.json", &c0.to_json())?;

    let x = random_contraction_tuple(ctx.seed, 1, 2)?;
    ctx.say(format!("random member of order 2 (seed {})", ctx.seed));
    let c1 = decompose(&spec, &x, ctx.seed, None)?;
    summarize(ctx, &c1);
    ctx.save("disc-drop-certificate.json", &c1.to_json())?;

    ctx.say("X = [[1.1]] lies outside");
    let (verdict, code) = membership(&spec, &MatrixTuple::from_scalars(&[1.1]), None, ctx.seed, false)?;
    ensure(code == exit::OUTSIDE, "1.1 is outside the disc drop")?;
    let violation = verdict["dnt_witness"]["gram_violation"].as_f64();
    ensure(violation.is_some_and(|v| v <= -1e-4), "witness violates the necessary condition")?;
    ctx.say(format!("  margin {:.3e}, witness violation {:.3e}", verdict["margin"].as_f64().unwrap_or(f64::NAN), violation.unwrap_or(f64::NAN)));
    ctx.save("disc-drop-outside.json", &pretty(&verdict))
}

fn notadrop(ctx: &Ctx) -> Result<(), CliError> {
    let p = notadrop_example(8)?;
    ctx.say(format!("weighted shift example truncated at N = {}, tail bound {:.3e}", p.order(), p.tail_bound()));
    let bc = compression_boundedness(&p)?;
    ctx.say(format!("  two-dimensional compression: {:?}, min top eigenvalue {:.4}", bc.boundedness, bc.min_top_eigenvalue));
    ensure(bc.boundedness == Boundedness::Bounded, "compression is bounded")?;
    let w = finite_interior_witness(&p)?;
    ctx.say(format!("  finite interior witness at d = {}, residual {:.2e}", w.d, w.max_residual()));
    ensure(w.max_residual() <= 1e-12, "finite interior witness residual")?;

    let spec = BodySpec::Generalized { pencil: p.clone() };
    let mut verdicts = Vec::new();
    for pt in [[0.5, 0.0], [0.92, 0.0], [2.0, 0.0]] {
        let (v, code) = membership(&spec, &MatrixTuple::from_scalars(&pt), None, ctx.seed, true)?;
        ctx.say(format!("  ({}, {}): {} at N = {}", pt[0], pt[1], v["certainty"].as_str().unwrap_or("?"), v["truncation_N"]));
        ensure(code != exit::UNDECIDED, "refinement decides the sample points")?;
        verdicts.push(v);
    }

    let k = GeneralizedOracle::new(p)?;
    let x = sample_members(&k, 1, 1, ctx.seed)?.remove(0).scale(0.5);
    ctx.say(format!("  level-1 member ({:.4}, {:.4})", x[0][(0, 0)], x[1][(0, 0)]));
    let cert = decompose(&spec, &x, ctx.seed, None)?;
    summarize(ctx, &cert);
    let artifact = json!({
        "seed": ctx.seed,
        "boundedness": serde_json::to_value(&bc).map_err(|e| CliError::Core(e.into()))?,
        "finite_interior_witness": serde_json::to_value(&w).map_err(|e| CliError::Core(e.into()))?,
        "memberships": verdicts,
    });
    ctx.save("notadrop.json", &pretty(&artifact))?;
    ctx.save("notadrop-certificate.json", &cert.to_json())
}
