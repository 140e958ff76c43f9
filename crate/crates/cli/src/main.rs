//! Command-line driver: runs one scenario (or the convergence study) and
//! writes its outputs.
//!
//! Exit codes: 0 success, 1 I/O failure while writing outputs, 2
//! configuration error, 3 numerical error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rdfm_hdg::output::write_file;
use rdfm_hdg::scenario::{builtin_example1, load_scenario, Example1Variant};
use rdfm_hdg::{convergence_study, run_scenario, write_outputs, CgOptions, Error, PenaltyParams, Scenario};

const CONVERGENCE_SIZES: [usize; 4] = [8, 16, 32, 64];

#[derive(Parser)]
#[command(name = "rdfm-hdg", version, about = "Unfitted HDG solver for Darcy flow with conductive and blocking fractures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a built-in benchmark.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "builtin")]
    scenario: Option<PathBuf>,
    /// Built-in benchmark: example1a (conductive) or example1b (blocking).
    #[arg(long)]
    builtin: Option<String>,
    /// Polynomial degree k.
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=2))]
    degree: Option<u8>,
    #[arg(long)]
    refine_steps: Option<usize>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Run the fracture-free manufactured convergence study instead.
    #[arg(long)]
    convergence: bool,
    /// Relative residual target of the linear solver.
    #[arg(long)]
    tol: Option<f64>,
    /// Penalty overrides `Cb,sb,Cc,sc[,L]`.
    #[arg(long, value_name = "Cb,sb,Cc,sc[,L]")]
    penalties: Option<String>,
}

/// An error together with the exit code it maps to.
struct Failure {
    code: u8,
    error: Error,
}

impl Failure {
    fn config(error: Error) -> Self {
        Failure { code: 2, error }
    }

    fn classify(error: Error) -> Self {
        let code = match error.root() {
            Error::Io(_) => 1,
            e if e.is_numerical() => 3,
            _ => 2,
        };
        Failure { code, error }
    }
}

fn parse_penalties(text: &str, base: PenaltyParams) -> Result<PenaltyParams, Error> {
    let values = text
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidArgument(format!("--penalties '{text}': {e}")))?;
    if !(4..=5).contains(&values.len()) {
        return Err(Error::InvalidArgument(format!(
            "--penalties expects 4 or 5 comma-separated values, got {}",
            values.len()
        )));
    }
    let mut p = PenaltyParams {
        c_b: values[0],
        s_b: values[1],
        c_c: values[2],
        s_c: values[3],
        ..base
    };
    if let Some(&l) = values.get(4) {
        p.length = l;
    }
    p.validate()?;
    Ok(p)
}

fn cg_options(args: &RunArgs) -> Result<CgOptions, Error> {
    let mut cg = CgOptions::default();
    if let Some(tol) = args.tol {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::InvalidArgument(format!("--tol must lie in (0, 1), got {tol}")));
        }
        cg.tol = tol;
    }
    Ok(cg)
}

fn build_scenario(args: &RunArgs) -> Result<Scenario, Error> {
    let mut s = match (&args.scenario, args.builtin.as_deref()) {
        (Some(path), None) => load_scenario(path)?,
        (None, Some("example1a")) => builtin_example1(Example1Variant::Conductive),
        (None, Some("example1b")) => builtin_example1(Example1Variant::Blocking),
        (None, Some(other)) => {
            return Err(Error::InvalidArgument(format!(
                "unknown built-in '{other}' (expected example1a or example1b)"
            )))
        }
        _ => return Err(Error::InvalidArgument("one of --scenario or --builtin is required".into())),
    };
    if let Some(k) = args.degree {
        s = s.with_degree(k.into());
    }
    if let Some(n) = args.refine_steps {
        s.mesh.refine_steps = n;
    }
    if let Some(n) = args.nx {
        s.mesh.nx = n;
    }
    if let Some(n) = args.ny {
        s.mesh.ny = n;
    }
    if let Some(text) = &args.penalties {
        s.penalties = parse_penalties(text, s.penalties)?;
    }
    s.validate()?;
    Ok(s)
}

fn run_convergence(args: &RunArgs, cg: CgOptions) -> Result<(), Failure> {
    let degree = args.degree.map_or(1, usize::from);
    let table = convergence_study(degree, &CONVERGENCE_SIZES, cg).map_err(Failure::classify)?;
    let mut stdout = std::io::stdout().lock();
    table.write(&mut stdout).map_err(Failure::classify)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Failure::classify(e.into()))?;
    let path = args.out.join(format!("convergence_k{degree}.csv"));
    write_file(&path, |w| table.write(w)).map_err(Failure::classify)?;
    Ok(())
}

fn run_one(s: &Scenario, out: &Path, cg: CgOptions) -> Result<(), Failure> {
    let run = run_scenario(s, cg).map_err(Failure::classify)?;
    let files = write_outputs(s, &run, out).map_err(Failure::classify)?;
    let mut stdout = std::io::stdout().lock();
    run.diagnostics.report(s).write(&mut stdout).map_err(Failure::classify)?;
    for f in files {
        println!("wrote: {}", f.display());
    }
    Ok(())
}

fn execute(args: &RunArgs) -> Result<(), Failure> {
    let cg = cg_options(args).map_err(Failure::config)?;
    if args.convergence {
        return run_convergence(args, cg);
    }
    let s = build_scenario(args).map_err(Failure::config)?;
    run_one(&s, &args.out, cg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run(args) = cli.command;
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.error);
            ExitCode::from(f.code)
        }
    }
}
