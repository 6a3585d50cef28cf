//! Experiment configuration files (TOML).
//!
//! ```toml
//! problem = "shekel4"
//! strategies = ["imp", "cvr", "kmeans"]
//! models = ["svgp"]            # also "exact-gp"
//! inducing = 100
//! budget = 1500
//! batch = 50
//! replicates = 10
//! base_seed = 0
//!
//! [train]
//! max_epochs = 300
//! ```
//!
//! Every other key is optional; see [`ExperimentConfig`] for defaults.
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use ipalloc::acq::BatchRequest;
use ipalloc::benchmarks::Problem;
use ipalloc::engine::{Acquisition, BoConfig, ModelKind};
use ipalloc::gp::ExactFitOptions;
use ipalloc::{IpaVariant, KernelFamily, TrainSchedule};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, Result};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "IPALLOC_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "results";

fn default_models() -> Vec<ModelKind> {
    vec![ModelKind::Svgp]
}
fn default_inducing() -> usize {
    250
}
fn default_budget() -> usize {
    5000
}
fn default_batch() -> usize {
    100
}
fn default_replicates() -> usize {
    1
}
fn default_kernel() -> KernelFamily {
    KernelFamily::Matern52
}
fn default_pool() -> usize {
    10_000
}
fn default_grid() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: String,
    /// IPA strategy specs such as `"imp"`, `"imp:softplus"`, `"ent:0.5"`.
    pub strategies: Vec<String>,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    #[serde(default = "default_inducing")]
    pub inducing: usize,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_batch")]
    pub batch: usize,
    /// Initial design size; defaults to `batch`.
    #[serde(default)]
    pub initial: Option<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Replicate `r` runs with seed `base_seed + r`.
    #[serde(default)]
    pub base_seed: u64,
    /// Defaults to `$IPALLOC_OUT_DIR`, then `results`.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[serde(default)]
    pub jobs: Option<usize>,
    /// Defaults to the loop that fits the problem.
    #[serde(default)]
    pub acquisition: Option<Acquisition>,
    #[serde(default = "default_kernel")]
    pub kernel: KernelFamily,
    /// Observation noise variance; defaults to the problem's own.
    #[serde(default)]
    pub noise: Option<f64>,
    #[serde(default = "default_pool")]
    pub candidate_pool: usize,
    #[serde(default = "default_grid")]
    pub accuracy_grid: usize,
    #[serde(default)]
    pub train: TrainSchedule,
    #[serde(default)]
    pub thompson: BatchRequest,
    #[serde(default = "exact_defaults")]
    pub exact: ExactFitOptions,
}

fn exact_defaults() -> ExactFitOptions {
    BoConfig::default().exact
}

/// One (model, strategy) combination; replicated over seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    /// Strategy column of the output: the IPA spec, or `exact-gp`.
    pub label: String,
    pub config: BoConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::ConfigParse {
            path: path.to_path_buf(),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text, path)
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let p = Problem::by_name(&self.problem)?;
        Ok(match self.noise {
            Some(v) => p.with_noise(v),
            None => p,
        })
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.replicates as u64).map(|r| self.base_seed + r)
    }

    pub fn strategy_variants(&self) -> Result<Vec<IpaVariant>> {
        self.strategies
            .iter()
            .map(|s| s.parse::<IpaVariant>().map_err(|e| CliError::Config(format!("strategy '{s}': {e}"))))
            .collect()
    }

    /// All cells of the experiment. An exact-GP model uses no inducing
    /// points, so it contributes a single cell whatever the strategy list.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let problem = self.build_problem()?;
        let acquisition = self.acquisition.unwrap_or_else(|| Acquisition::for_problem(&problem));
        let base = BoConfig {
            budget: self.budget,
            batch: self.batch,
            inducing: self.inducing,
            initial: self.initial,
            acquisition,
            schedule: self.train.clone(),
            request: self.thompson,
            kernel: self.kernel,
            exact: self.exact,
            candidate_pool: self.candidate_pool,
            accuracy_grid: self.accuracy_grid,
            ..BoConfig::default()
        };
        let mut cells = Vec::new();
        for model in &self.models {
            match model {
                ModelKind::Svgp => {
                    for v in self.strategy_variants()? {
                        cells.push(Cell {
                            label: v.to_string(),
                            config: BoConfig {
                                strategy: v,
                                model: ModelKind::Svgp,
                                ..base.clone()
                            },
                        });
                    }
                }
                ModelKind::ExactGp => cells.push(Cell {
                    label: ModelKind::ExactGp.to_string(),
                    config: BoConfig {
                        model: ModelKind::ExactGp,
                        ..base.clone()
                    },
                }),
            }
        }
        Ok(cells)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.models.is_empty() {
            return bad("models must list at least one model kind".into());
        }
        if self.models.contains(&ModelKind::Svgp) && self.strategies.is_empty() {
            return bad("strategies must list at least one IPA strategy for svgp models".into());
        }
        if self.jobs == Some(0) {
            return bad("jobs must be at least 1".into());
        }
        if let Some(v) = self.noise {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("noise must be a finite nonnegative variance (got {v})"));
            }
        }
        for cell in self.cells()? {
            let problem = self.build_problem()?;
            cell.config
                .validate()
                .map_err(|e| CliError::Config(format!("{}: {e}", cell.label)))?;
            let expected = Acquisition::for_problem(&problem);
            if cell.config.acquisition != expected {
                return bad(format!(
                    "acquisition '{}' does not fit problem '{}' (use '{expected}')",
                    cell.config.acquisition, self.problem
                ));
            }
            if cell.config.model == ModelKind::ExactGp && expected != Acquisition::Thompson {
                return bad("exact-gp models support single-objective problems only".into());
            }
        }
        Ok(())
    }
}
