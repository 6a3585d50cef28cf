//! Experiment runner for `ipalloc`: TOML configs in, per-run CSVs and a
//! `summary.json` out, plus a report aggregator and an allocation demo.

pub mod config;
pub mod demo;
pub mod error;
pub mod output;
pub mod report;

use std::path::{Path, PathBuf};

use ipalloc::engine::{self, ModelKind};
use rayon::prelude::*;

pub use config::{Cell, ExperimentConfig};
pub use error::{CliError, Result};
pub use output::{CellSummary, ExperimentSummary};

/// Runs every cell × seed of `cfg` on a pool of `cfg.jobs` threads and writes
/// one CSV per run plus `summary.json` into `out_dir` (or the configured
/// directory). Runs are independent and seeded, so the thread count never
/// changes the results.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<(PathBuf, ExperimentSummary)> {
    cfg.validate()?;
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir());
    std::fs::create_dir_all(&dir).map_err(error::io_err(&dir))?;
    let problem = cfg.build_problem()?;
    let jobs: Vec<(Cell, u64)> = cfg
        .cells()?
        .into_iter()
        .flat_map(|c| cfg.seeds().map(move |s| (c.clone(), s)))
        .collect();

    let threads = cfg.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;

    let runs = pool.install(|| {
        jobs.par_iter()
            .map(|(cell, seed)| -> Result<CellSummary> {
                log::info!("{} / {} / seed {seed}", problem.name(), cell.label);
                let record = engine::run(&cell.config, &problem, *seed)?;
                let m = match cell.config.model {
                    ModelKind::Svgp => cell.config.inducing,
                    ModelKind::ExactGp => 0,
                };
                let name = output::csv_name(problem.name(), &cell.label, m, *seed);
                output::write_atomic(&dir.join(&name), output::run_csv(&record, &cell.label, m).as_bytes())?;
                Ok(CellSummary {
                    strategy: cell.label.clone(),
                    model: cell.config.model.to_string(),
                    seed: *seed,
                    csv: name,
                    final_metric: record.final_metric(),
                    total_overhead_s: record.steps.iter().map(|s| s.fit_s + s.acq_s + s.ipa_s).sum(),
                    steps: record.steps.len().saturating_sub(1),
                    fit_failures: record.steps.iter().filter(|s| s.fit_failed).count(),
                    believed_optimum: record.believed_optimum,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let summary = ExperimentSummary {
        schema: 1,
        problem: problem.name().to_string(),
        config: cfg.clone(),
        runs,
    };
    summary.write(&dir)?;
    Ok((dir, summary))
}

/// Aggregated table of every run CSV in `dir`.
pub fn report_dir(dir: &Path) -> Result<String> {
    let runs = report::load_runs(dir)?;
    Ok(report::render(&report::aggregate(&runs)))
}
