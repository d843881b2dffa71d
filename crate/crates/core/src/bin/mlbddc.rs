use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mlbddc::harness::{self, RunConfig};
use mlbddc::Error;

#[derive(Parser)]
#[command(name = "mlbddc", version, about = "Multilevel BDDC benchmark driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and print a CSV row.
    Solve(RunArgs),
    /// Run one configuration per line of FILE and print CSV rows.
    Sweep {
        file: PathBuf,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Print face, edge and vertex counts for every level.
    AnalyzeGlobs(RunArgs),
    /// Solve and write the solution and subdomains as legacy VTK.
    ExportVtk(RunArgs),
}

#[derive(Args, Default)]
struct RunArgs {
    /// File of key=value settings applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// poisson or elasticity
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    /// Elements per axis.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    levels: Option<String>,
    /// Subdomain hierarchy, e.g. 64/8/1.
    #[arg(long)]
    subdomains: Option<String>,
    /// corners, corners+edges or corners+edges+faces
    #[arg(long)]
    policy: Option<String>,
    /// cardinality or stiffness
    #[arg(long)]
    weights: Option<String>,
    /// heuristic or all
    #[arg(long)]
    corners: Option<String>,
    /// auto, regular or greedy
    #[arg(long)]
    partition: Option<String>,
    /// pcg or bicgstab
    #[arg(long)]
    krylov: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    max_it: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    #[arg(long)]
    deterministic: Option<String>,
    /// Output file; stdout when absent (required for export-vtk).
    #[arg(long, short)]
    output: Option<String>,
    /// Extra key=value settings.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn config(&self) -> mlbddc::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let flags = [
            ("problem", &self.problem),
            ("dim", &self.dim),
            ("n", &self.n),
            ("subdomains", &self.subdomains),
            ("levels", &self.levels),
            ("policy", &self.policy),
            ("weights", &self.weights),
            ("corners", &self.corners),
            ("partition", &self.partition),
            ("krylov", &self.krylov),
            ("tol", &self.tol),
            ("max_it", &self.max_it),
            ("workers", &self.workers),
            ("deterministic", &self.deterministic),
            ("output", &self.output),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                c.set(k, v)?;
            }
        }
        for kv in &self.set {
            c.apply_str(kv)?;
        }
        Ok(c)
    }
}

fn emit(rows: &[harness::RunRow], output: Option<&PathBuf>) -> mlbddc::Result<()> {
    match output {
        Some(p) => harness::write_csv(rows, std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => harness::write_csv(rows, std::io::stdout().lock()),
    }
}

fn run(cli: Cli) -> mlbddc::Result<bool> {
    match cli.command {
        Command::Solve(a) => {
            let c = a.config()?;
            let out = harness::run_experiment(&c)?;
            emit(std::slice::from_ref(&out.row), c.output.as_ref())?;
            Ok(out.row.converged)
        }
        Command::Sweep { file, args } => {
            let base = args.config()?;
            let configs = harness::parse_sweep(&std::fs::read_to_string(&file)?, &base)?;
            for c in &configs {
                c.validate()?;
            }
            let rows = harness::sweep(&configs)?;
            emit(&rows, base.output.as_ref())?;
            Ok(rows.iter().all(|r| r.converged))
        }
        Command::AnalyzeGlobs(a) => {
            let c = a.config()?;
            let report = harness::analyze_globs(&c)?;
            match &c.output {
                Some(p) => std::fs::write(p, report)?,
                None => print!("{report}"),
            }
            Ok(true)
        }
        Command::ExportVtk(a) => {
            let c = a.config()?;
            let path = c
                .output
                .clone()
                .ok_or_else(|| Error::Config("export-vtk needs --output".into()))?;
            Ok(harness::export_vtk(&c, &path)?.row.converged)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("mlbddc: Krylov iteration did not converge");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("mlbddc: {e}");
            ExitCode::from(harness::exit_code(&e))
        }
    }
}
