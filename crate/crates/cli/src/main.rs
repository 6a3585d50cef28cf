use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ipalloc_cli::demo::{write_demo, DemoArgs};
use ipalloc_cli::{report_dir, run_experiment, ExperimentConfig, Result};

#[derive(Parser)]
#[command(name = "ipalloc", version, about = "Quality-weighted inducing point allocation for batch BO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Allocate inducing points on a 2-D problem (or 2-D slice) and dump them.
    IpaDemo {
        problem: String,
        strategy: String,
        #[arg(long, default_value_t = 250)]
        n: usize,
        #[arg(long, default_value_t = 25)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Side of the prediction grid.
        #[arg(long, default_value_t = 50)]
        grid: usize,
        #[arg(long, default_value = "ipa_demo.csv")]
        out: PathBuf,
    },
    /// Summarise the run CSVs in a directory.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run { config, out_dir } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (dir, summary) = run_experiment(&cfg, out_dir.as_deref())?;
            println!("{} runs written to {}", summary.runs.len(), dir.display());
        }
        Command::IpaDemo {
            problem,
            strategy,
            n,
            m,
            seed,
            grid,
            out,
        } => {
            let args = DemoArgs {
                problem,
                strategy,
                n,
                m,
                seed,
                grid,
                output: out,
            };
            let (written, path) = write_demo(&args)?;
            println!("{} rows written to {}", written.rows, path.display());
        }
        Command::Report { dir } => print!("{}", report_dir(&dir)?),
    }
    Ok(())
}
