use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use selfdual_cli::{execute, Overrides, TaskKind, EXIT_ERROR};

#[derive(Parser)]
#[command(name = "selfdual", version, about = "Put-call symmetry checks, α solver, pricing and barrier hedges")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed for all random streams.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(0..=i64::MAX as u64))]
    seed: Option<u64>,
    /// Monte-Carlo sample count.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(2..=i64::MAX as u64))]
    samples: Option<u64>,
    /// Absolute tolerance for exact and quadrature residuals.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Directory for report.toml and CSV tables.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Symmetry checks on a distribution or Lévy triplet.
    Check { spec: PathBuf },
    /// Order of quasi-self-duality for a triplet.
    Alpha { spec: PathBuf },
    /// Price a payoff.
    Price { spec: PathBuf },
    /// Build and evaluate a semi-static barrier hedge.
    Hedge { spec: PathBuf },
    /// Support functions of lift zonoids.
    Zonoid { spec: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, path) = match cli.command {
        Command::Check { spec } => (TaskKind::Check, spec),
        Command::Alpha { spec } => (TaskKind::Alpha, spec),
        Command::Price { spec } => (TaskKind::Price, spec),
        Command::Hedge { spec } => (TaskKind::Hedge, spec),
        Command::Zonoid { spec } => (TaskKind::Zonoid, spec),
    };
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return ExitCode::from(EXIT_ERROR as u8);
        }
    };
    let ov = Overrides {
        kind: Some(kind),
        seed: cli.seed,
        samples: cli.samples,
        tol: cli.tol,
    };
    match execute(&text, &ov, cli.out.as_deref()) {
        Ok((code, report)) => {
            print!("{report}");
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
