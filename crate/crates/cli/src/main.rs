use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rendezvous_cli::{app, CliError};

#[derive(Parser)]
#[command(
    name = "rendezvous",
    version,
    about = "Leader-follower rendezvous of unicycle robots"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and export the run.
    Run {
        scenario: PathBuf,
        /// Stop at the first monitor violation and exit with status 3.
        #[arg(long)]
        strict: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Validate a scenario and its initial sensing graph.
    Check { scenario: PathBuf },
    /// Recompute metrics from an exported run directory.
    Metrics { log: PathBuf },
    /// Write a matplotlib script for an exported run directory.
    Plots { dir: PathBuf },
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            scenario,
            strict,
            out,
        } => {
            let summary = app::run_scenario(&scenario, &out, strict)?;
            let r = &summary.report;
            println!(
                "{} records, t = {:.3} s, converged: {}, violations: {}",
                r.records, r.final_time, r.converged, r.violations
            );
            println!("wrote {}", summary.out_dir.display());
        }
        Command::Check { scenario } => {
            let cfg = app::check_scenario(&scenario)?;
            println!("ok: {} robots, informed robot roots a spanning tree", cfg.n);
        }
        Command::Metrics { log } => {
            println!("{}", app::metrics_for_dir(&log)?.to_json());
        }
        Command::Plots { dir } => {
            println!("wrote {}", app::plots_for_dir(&dir)?.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
