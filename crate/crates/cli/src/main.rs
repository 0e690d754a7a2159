use std::path::PathBuf;
use std::process::ExitCode;

use cch_cli::{execute, Command, Verdict, OUTPUT_ROOT_ENV};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cch", version, about = "Run convective Cahn-Hilliard experiments from TOML configs")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Single integration (kind = "run")
    Run(Args),
    /// Parameter sweep (kind = "sweep_p" or "sweep_delta")
    Sweep(Args),
    /// Verification suite (kind = "verify_*")
    Verify(Args),
}

#[derive(clap::Args)]
struct Args {
    config: PathBuf,
    /// Repeat the experiment at twice the grid size and compare headline numbers
    #[arg(long)]
    resolution_double: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Run(a) => (Command::Run, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
        Cmd::Verify(a) => (Command::Verify, a),
    };
    let root = std::env::var_os(OUTPUT_ROOT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from);
    match execute(command, &args.config, args.resolution_double, root.as_deref()) {
        Ok(ex) => {
            println!("{}: artifacts in {}", ex.report.kind, ex.report.directory.display());
            if let Some(h) = &ex.report.headline {
                println!("{}: {:?}", h.label, h.values);
            }
            if let Some(r) = &ex.resolution {
                println!(
                    "resolution n={} -> {}: {:?}, relative change {:e}",
                    r.n, r.doubled_n, r.doubled, r.relative_change
                );
            }
            match &ex.verdict {
                Verdict::Success => println!("success"),
                Verdict::NumericalFailure { reason } => eprintln!("numerical failure: {reason}"),
                Verdict::CertificationFailure { reason } => eprintln!("certification failure: {reason}"),
            }
            ExitCode::from(ex.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
