use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use recutil_cli::{list_experiments, run_experiment, ExperimentConfig, THREADS_ENV};

#[derive(Parser)]
#[command(name = "recutil", version, about = "Recursive-utility fixed-point experiments")]
struct Cli {
    /// Worker threads for the numerical kernels (defaults to all cores).
    #[arg(long, env = THREADS_ENV, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its report and tables.
    Run {
        #[arg(long)]
        experiment: String,
        /// JSON configuration; `{}` selects every default.
        #[arg(long)]
        config: PathBuf,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the experiment catalog.
    List,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::List => {
            for e in list_experiments() {
                println!("{:<18} {}: {}", e.tag, e.topic, e.description);
            }
        }
        Command::Run {
            experiment,
            config,
            out,
        } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let report = run_experiment(&experiment, cfg)?;
            let paths = report.write(&out)?;
            for c in &report.checks {
                println!(
                    "{:<12} {}: {}",
                    format!("{:?}", c.verdict).to_uppercase(),
                    c.name,
                    c.detail
                );
            }
            for f in &report.findings {
                println!("finding: {f}");
            }
            println!(
                "{} pass, {} fail, {} inconclusive in {:.2}s; wrote {} files to {}",
                report.summary.pass,
                report.summary.fail,
                report.summary.inconclusive,
                report.timing.wall_time_s,
                paths.len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
