//! Batch CLI for weak Galerkin biharmonic convergence studies.
//!
//! `wgbh run` executes a manufactured-solution study over a refinement list
//! and writes a CSV or Markdown report; `wgbh regress` compares a report CSV
//! against a baseline CSV (exit code 1 on mismatch). Any runtime error exits
//! with code 2.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wgbh::error::{Error, Result};
use wgbh::solver::SolvePath;
use wgbh::study::{self, Format, MeshFamily, StudyConfig, Tolerances};

#[derive(Parser)]
#[command(
    name = "wgbh",
    about = "Weak Galerkin finite element solver for the 2D biharmonic equation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study for a built-in manufactured solution.
    Run(RunArgs),
    /// Compare a report CSV against a baseline CSV.
    Regress(RegressArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Manufactured case: quad, bubble, trig, or biquad.
    #[arg(long)]
    case: String,
    /// Mesh family: tri, rect, or file.
    #[arg(long)]
    mesh: String,
    /// Refinement levels, e.g. `2,4,8` or `2,4,...,128` (geometric fill-in).
    #[arg(long, default_value = "")]
    n: String,
    /// Element degree (k >= 2).
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Output path for the report.
    #[arg(long)]
    out: PathBuf,
    /// Output format: csv or md.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Suppress wall-clock times so identical runs emit identical bytes.
    #[arg(long)]
    deterministic: bool,
    /// Mesh file in `wgmesh 1` format (with `--mesh file`).
    #[arg(long)]
    mesh_file: Option<PathBuf>,
    /// Solve the full system instead of the condensed skeleton system.
    #[arg(long)]
    no_condense: bool,
}

#[derive(Args)]
struct RegressArgs {
    /// Report CSV produced by `wgbh run`.
    #[arg(long)]
    report: PathBuf,
    /// Baseline CSV to compare against.
    #[arg(long)]
    baseline: PathBuf,
}

/// Parses `2,4,8` or an elided geometric list like `2,4,...,128`.
fn parse_levels(text: &str) -> Result<Vec<usize>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let tokens: Vec<&str> = text.split(',').map(str::trim).collect();
    let mut levels: Vec<usize> = Vec::new();
    for (idx, token) in tokens.iter().enumerate() {
        if *token == "..." {
            if idx < 2 || idx + 1 != tokens.len() - 1 {
                return Err(Error::Config(
                    "`...` needs two levels before it and exactly one after".into(),
                ));
            }
            let a = levels[levels.len() - 2];
            let b = levels[levels.len() - 1];
            if b <= a || !b.is_multiple_of(a) {
                return Err(Error::Config(format!(
                    "cannot extend `{a},{b},...`: ratio must be an integer > 1"
                )));
            }
            let ratio = b / a;
            let last: usize = tokens[idx + 1]
                .parse()
                .map_err(|_| Error::Config(format!("bad level `{}`", tokens[idx + 1])))?;
            let mut next = b * ratio;
            while next < last {
                levels.push(next);
                next *= ratio;
            }
            if next != last {
                return Err(Error::Config(format!(
                    "`...` does not land on {last} with ratio {ratio}"
                )));
            }
            levels.push(last);
            return Ok(levels);
        }
        levels.push(
            token
                .parse()
                .map_err(|_| Error::Config(format!("bad level `{token}`")))?,
        );
    }
    Ok(levels)
}

fn run(args: &RunArgs) -> Result<()> {
    let config = StudyConfig {
        case: args.case.clone(),
        mesh: MeshFamily::parse(&args.mesh)?,
        refinements: parse_levels(&args.n)?,
        k: args.k,
        mesh_file: args.mesh_file.clone(),
        deterministic: args.deterministic,
        path: if args.no_condense {
            SolvePath::Full
        } else {
            SolvePath::Condensed
        },
    };
    let format = Format::parse(&args.format)?;
    let report = study::run_case(&config)?;
    std::fs::write(&args.out, study::emit(&report, format))?;
    eprintln!(
        "case {} on {} meshes (k = {}, tangential data {}): {} level(s) -> {}",
        report.case,
        report.mesh,
        report.k,
        report.tangential.label(),
        report.rows.len(),
        args.out.display()
    );
    eprint!("{}", study::emit(&report, Format::Markdown));
    Ok(())
}

fn regress(args: &RegressArgs) -> Result<bool> {
    let report = study::parse_csv(&std::fs::read_to_string(&args.report)?)?;
    let baseline = study::parse_csv(&std::fs::read_to_string(&args.baseline)?)?;
    let outcome = study::regress(&report, &baseline, &Tolerances::default());
    if outcome.pass() {
        eprintln!(
            "regression pass: {} cell(s) within tolerance",
            outcome.compared_cells
        );
    } else {
        eprintln!(
            "regression FAIL: {} of {} cell(s) out of tolerance",
            outcome.diffs.len(),
            outcome.compared_cells
        );
        for diff in &outcome.diffs {
            eprintln!("  {diff}");
        }
    }
    Ok(outcome.pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => run(args).map(|()| true),
        Command::Regress(args) => regress(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
