use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hyperperc_cli::{config, pipelines, suites, CliError};

#[derive(Parser)]
#[command(name = "hyperperc", version, about = "Percolation, operator-norm and half-space experiments on trees, grids and hyperbolic tilings")]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a window and write it as JSON.
    Generate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Monte Carlo estimators, one CSV row per estimate.
    Percolate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Operator norms and diagrams of the two-point matrix.
    Norms {
        #[arg(long)]
        config: PathBuf,
    },
    /// Half-space decompositions of point clouds or vertex sets.
    Magic {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a pipeline over a p grid (the criterion table by default).
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run an invariant suite and write a JSON report.
    Verify {
        /// oracles, geometry, magic, percolation, operators or all
        suite: String,
        /// Run only the check with this name.
        #[arg(long)]
        only: Option<String>,
        /// Perturb the reference value of the named check.
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
}

type Pipeline = fn(&config::Loaded) -> Result<Vec<u8>, CliError>;

fn write_out(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(bytes).map_err(|e| CliError::Io(e.to_string())),
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().map_err(|e| CliError::Resource(e.to_string()))?;
    }
    let pipeline = match &cli.command {
        Command::Verify { suite, only, inject_fault } => {
            let report = suites::run_suite(suite, only.as_deref(), inject_fault.as_deref())?;
            let mut bytes = serde_json::to_vec_pretty(&report).expect("reports serialise");
            bytes.push(b'\n');
            write_out(cli.out.as_deref(), &bytes)?;
            for c in report.checks.iter().filter(|c| !c.passed) {
                eprintln!("FAIL {}::{}: {}", c.suite, c.name, c.detail);
            }
            return Ok(report.passed);
        }
        Command::Generate { config } => (config, pipelines::generate as Pipeline),
        Command::Percolate { config } => (config, pipelines::percolate as Pipeline),
        Command::Norms { config } => (config, pipelines::norms as Pipeline),
        Command::Magic { config } => (config, pipelines::magic as Pipeline),
        Command::Sweep { config } => (config, pipelines::sweep as Pipeline),
    };
    let (path, f) = pipeline;
    let loaded = config::load(path, cli.seed)?;
    let bytes = f(&loaded)?;
    let out = cli.out.clone().or_else(|| loaded.config.out.as_ref().map(|p| loaded.base.join(p)));
    write_out(out.as_deref(), &bytes)?;
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
