use clap::{Parser, Subcommand};
use shufmm_cli::audit::audit_problem;
use shufmm_cli::config::load_config;
use shufmm_cli::runner::{build_problem, run_experiment, run_sweep};
use shufmm_cli::summarize::{format_table, summarize_traces};
use shufmm_cli::Result;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "shufmm",
    version,
    about = "Shuffling gradient minimax experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured seed and write traces and a summary.
    Run { config: PathBuf },
    /// Run the learning-rate grid and tabulate every value.
    Sweep { config: PathBuf },
    /// Audit the declared problem constants at random points.
    Validate { config: PathBuf },
    /// Print per-algorithm statistics of trace files.
    Summarize {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            let report = run_experiment(&cfg)?;
            for o in &report.outcomes {
                println!("seed {}: {}", o.seed, o.status.as_str());
            }
            println!("trace: {}", report.trace_path.display());
            println!("summary: {}", report.summary_path.display());
            report.into_result().map(|_| ())
        }
        Command::Sweep { config } => {
            let cfg = load_config(&config)?;
            let report = run_sweep(&cfg)?;
            print!(
                "{}",
                std::fs::read_to_string(&report.sweep_path).unwrap_or_default()
            );
            println!("sweep table: {}", report.sweep_path.display());
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            let prob = build_problem(&cfg)?;
            let report = audit_problem(&prob, cfg.seeds[0]);
            print!("{report}");
            for w in report.warnings() {
                eprintln!(
                    "warning: declared {} = {:e} is exceeded by a factor {:e}",
                    w.constant, w.declared, w.worst_ratio
                );
            }
            Ok(())
        }
        Command::Summarize { traces } => {
            print!("{}", format_table(&summarize_traces(&traces)?));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
