//! `fex`: membership queries, free extreme decompositions, certificate
//! checks and demos.
//!
//! Exit codes: 0 success or inside, 1 failed verification or numerical
//! failure, 2 bad input, 3 outside (or not a member), 4 undecided, 5
//! invariant violation.

mod commands;
mod demo;
mod error;
mod input;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fex_core::extremal::DecompositionCertificate;

use crate::commands::{emit, pretty};
use crate::error::{exit, CliError};

#[derive(Parser)]
#[command(name = "fex", version, about = "Free extreme point decompositions of matrix convex sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Feasibility tolerance (membership verdicts and certificate checks).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Truncation order for generator inputs.
    #[arg(long = "truncation-N")]
    truncation_n: Option<usize>,
    /// Output file (a directory for `demo`); stdout by default.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress human-readable notes.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Membership of a tuple in a set; exits 0 inside, 3 outside, 4 undecided.
    Membership {
        set: PathBuf,
        tuple: PathBuf,
        /// Double the truncation order of a generator until decided.
        #[arg(long)]
        refine: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Decomposes a member into free extreme points and prints the certificate.
    Decompose {
        set: PathBuf,
        tuple: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Re-checks a certificate; exits 1 naming the first failed check.
    Verify {
        certificate: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Runs a worked example end to end.
    Demo {
        #[arg(value_enum)]
        name: demo::DemoName,
        #[command(flatten)]
        common: Common,
    },
}

fn note(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        eprintln!("{}", msg.as_ref());
    }
}

fn run(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::Membership { set, tuple, refine, common } => {
            let spec = input::load_body(&set, common.truncation_n)?;
            let x = input::load_tuple(&tuple)?;
            let (verdict, code) = commands::membership(&spec, &x, common.tol, common.seed, refine)?;
            emit(&pretty(&verdict), common.out.as_deref())?;
            let word = match code {
                exit::OK => "inside",
                exit::OUTSIDE => "outside",
                _ => "undecided",
            };
            note(common.quiet, format!("{word} (margin {})", verdict["margin"]));
            Ok(code)
        }
        Command::Decompose { set, tuple, common } => {
            let spec = input::load_body(&set, common.truncation_n)?;
            let x = input::load_tuple(&tuple)?;
            let cert = commands::decompose(&spec, &x, common.seed, common.tol)?;
            emit(&cert.to_json(), common.out.as_deref())?;
            note(common.quiet, format!("{} component(s), {} step(s)", cert.components.len(), cert.steps.len()));
            Ok(exit::OK)
        }
        Command::Verify { certificate, common } => {
            let cert = DecompositionCertificate::from_json(&input::read(&certificate)?)?;
            let report = commands::verify(&cert)?;
            emit(&pretty(&report), common.out.as_deref())?;
            match commands::first_failure(&report) {
                Some(e) => Err(e),
                None => {
                    note(common.quiet, "certificate verified");
                    Ok(exit::OK)
                }
            }
        }
        Command::Demo { name, common } => {
            demo::run(name, common.seed, common.out.as_deref().map(Path::new), common.quiet)?;
            Ok(exit::OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
