use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "heatobs",
    version,
    about = "Reproducible heat observability and control experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory; overrides the config.
        #[arg(long, env = heatobs::OUT_DIR_ENV)]
        out: Option<PathBuf>,
        /// Worker threads for sweeps (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Echo the run log to stderr.
        #[arg(long)]
        verbose: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run {
        config,
        out,
        threads,
        verbose,
    } = cli.command;
    env_logger::Builder::new()
        .filter_level(if verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .format_timestamp(None)
        .init();
    let cfg = match heatobs::config::load(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            return ExitCode::from(2);
        }
    };
    let dir = heatobs::resolve_out_dir(out.as_deref(), &cfg);
    match heatobs::run(&cfg, &dir, threads) {
        Ok(summary) => {
            for c in summary.checks.iter().filter(|c| !c.passed) {
                eprintln!("check failed: {} ({})", c.name, c.detail);
            }
            println!(
                "{}: {} of {} checks passed, artifacts in {}",
                summary.experiment,
                summary.checks.iter().filter(|c| c.passed).count(),
                summary.checks.len(),
                dir.display()
            );
            if summary.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
