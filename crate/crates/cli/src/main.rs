use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ncfem::study::{default_options, STANDARD_LEVELS};
use ncfem::{build_mesh, run_identity_suite, Domain, TableFormat};

#[derive(Parser)]
#[command(name = "ncfem", version, about = "Nonconforming finite element studies and identity checks")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Crouzeix-Raviart convergence table on the square sine problem.
    Poisson(StudyArgs),
    /// Morley convergence table on the parallelogram plate problem.
    Plate(StudyArgs),
    /// Checks the exact identities between the nonconforming and mixed methods.
    Verify(VerifyArgs),
    /// Writes the vertices and triangles of a uniform mesh.
    MeshDump(DumpArgs),
}

#[derive(Args)]
struct LevelArgs {
    /// Comma-separated cells per side, e.g. `4,8,16`.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    /// Drop levels above n = 32.
    #[arg(long)]
    quick: bool,
    /// Accept any increasing levels instead of 4, 8, 16, ...
    #[arg(long)]
    allow_any_n: bool,
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    levels: LevelArgs,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    format: Format,
    /// Relative residual required from the linear solver.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    levels: LevelArgs,
    /// Seed of the randomized checks.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct DumpArgs {
    /// Cells per side.
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, value_enum, default_value_t = DomainArg::Square)]
    domain: DomainArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Markdown,
    /// Run record with errors, rates, solver statistics and wall time.
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainArg {
    Square,
    Parallelogram,
}

fn parse_levels(args: &LevelArgs, default: &[usize]) -> Result<Vec<usize>, String> {
    let mut levels = args.levels.clone().unwrap_or_else(|| default.to_vec());
    if args.quick {
        levels.retain(|&n| n <= 32);
    }
    if levels.is_empty() {
        return Err("no levels to run".into());
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(format!("levels must be strictly increasing: {levels:?}"));
    }
    for &n in &levels {
        let standard = n >= 4 && n % 4 == 0 && n.is_power_of_two();
        if !args.allow_any_n && !standard {
            return Err(format!("level {n} is not a power-of-two multiple of 4 (pass --allow-any-n)"));
        }
        if n < 2 {
            return Err(format!("level {n} is too coarse for post-processing"));
        }
    }
    Ok(levels)
}

fn output(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Poisson(args) => study(args, false),
        Command::Plate(args) => study(args, true),
        Command::Verify(args) => {
            let levels = parse_levels(&args.levels, &[4, 8, 16])?;
            let report = run_identity_suite(&levels, args.seed).map_err(|e| e.to_string())?;
            let mut out = output(&args.levels.out).map_err(|e| e.to_string())?;
            let mut text = String::new();
            for c in &report.checks {
                text.push_str(&format!("{c}\n"));
            }
            let failed = report.failures().count();
            if failed == 0 {
                text.push_str("all identities passed\n");
            } else {
                text.push_str(&format!("{failed} identities failed\n"));
            }
            out.write_all(text.as_bytes()).map_err(|e| e.to_string())?;
            Ok(failed == 0)
        }
        Command::MeshDump(args) => {
            let domain = match args.domain {
                DomainArg::Square => Domain::UnitSquare,
                DomainArg::Parallelogram => Domain::Parallelogram,
            };
            let mesh = build_mesh(domain, args.n).map_err(|e| e.to_string())?;
            let out = output(&args.out).map_err(|e| e.to_string())?;
            mesh.write_dump(out).map_err(|e| e.to_string())?;
            Ok(true)
        }
    }
}

fn study(args: StudyArgs, plate: bool) -> Result<bool, String> {
    let levels = parse_levels(&args.levels, &STANDARD_LEVELS)?;
    let run = if plate {
        let opts = default_options(&ncfem::parallelogram_plate_problem(), args.tol);
        ncfem::run_plate_study(&levels, &opts)
    } else {
        let opts = default_options(&ncfem::square_sine_problem(), args.tol);
        ncfem::run_poisson_study(&levels, &opts)
    }
    .map_err(|e| e.to_string())?;
    let text = match args.format {
        Format::Csv => run.table.emit(TableFormat::Csv),
        Format::Markdown => run.table.emit(TableFormat::Markdown),
        Format::Json => serde_json::to_string_pretty(&run.record()).map_err(|e| e.to_string())? + "\n",
    };
    let mut out = output(&args.levels.out).map_err(|e| e.to_string())?;
    out.write_all(text.as_bytes()).map_err(|e| e.to_string())?;
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
