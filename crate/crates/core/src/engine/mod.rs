//! Experiment loops: batch Bayesian optimisation, active learning and
//! multi-objective optimisation with sparse (or exact) GP surrogates.

mod metrics;
mod run;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use metrics::{classification_accuracy, hypervolume_difference, simple_regret};
pub use run::{run, run_active_learning, run_bo, run_moo, Surrogate};

use crate::acq::BatchRequest;
use crate::benchmarks::Problem;
use crate::error::{Error, Result};
use crate::gp::{ExactFitOptions, KernelFamily};
use crate::ipa::{IpaVariant, QualitySpec};
use crate::svgp::TrainSchedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Acquisition {
    Thompson,
    ChebyshevTs,
    BaldTopk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Svgp,
    ExactGp,
}

impl Acquisition {
    /// The acquisition loop that fits `problem`.
    pub fn for_problem(problem: &Problem) -> Self {
        if problem.is_classification() {
            Self::BaldTopk
        } else if problem.n_outputs() > 1 {
            Self::ChebyshevTs
        } else {
            Self::Thompson
        }
    }
}

impl FromStr for Acquisition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "thompson" | "ts" => Ok(Self::Thompson),
            "chebyshev-ts" | "chebyshev" => Ok(Self::ChebyshevTs),
            "bald-topk" | "bald" => Ok(Self::BaldTopk),
            _ => Err(Error::InvalidParameter(format!(
                "unknown acquisition '{s}' (valid: thompson, chebyshev-ts, bald-topk)"
            ))),
        }
    }
}

impl fmt::Display for Acquisition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Thompson => "thompson",
            Self::ChebyshevTs => "chebyshev-ts",
            Self::BaldTopk => "bald-topk",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "svgp" => Ok(Self::Svgp),
            "exact-gp" | "exact" => Ok(Self::ExactGp),
            _ => Err(Error::InvalidParameter(format!("unknown model kind '{s}' (valid: svgp, exact-gp)"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Svgp => "svgp",
            Self::ExactGp => "exact-gp",
        })
    }
}

/// Largest budget an exact-GP baseline run may use.
pub const EXACT_GP_MAX_EVALS: usize = 1000;

/// Everything that determines a run apart from the problem and the seed.
#[derive(Clone, Debug, PartialEq)]
pub struct BoConfig {
    /// Total evaluation budget `R`.
    pub budget: usize,
    pub batch: usize,
    pub inducing: usize,
    /// Initial design size; defaults to `batch`.
    pub initial: Option<usize>,
    pub strategy: IpaVariant,
    pub acquisition: Acquisition,
    pub model: ModelKind,
    pub schedule: TrainSchedule,
    pub request: BatchRequest,
    pub kernel: KernelFamily,
    pub exact: ExactFitOptions,
    /// Uniform candidates scored per active-learning step.
    pub candidate_pool: usize,
    /// Side of the held-out accuracy grid.
    pub accuracy_grid: usize,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            budget: 5000,
            batch: 100,
            inducing: 250,
            initial: None,
            strategy: IpaVariant::QualityDpp(QualitySpec::Constant),
            acquisition: Acquisition::Thompson,
            model: ModelKind::Svgp,
            schedule: TrainSchedule::default(),
            request: BatchRequest::default(),
            kernel: KernelFamily::Matern52,
            exact: ExactFitOptions {
                iterations: 50,
                restarts: 1,
                ..ExactFitOptions::default()
            },
            candidate_pool: 10_000,
            accuracy_grid: 64,
        }
    }
}

impl BoConfig {
    pub fn initial_size(&self) -> usize {
        self.initial.unwrap_or(self.batch)
    }

    /// Number of acquisition steps the budget allows after the initial design.
    pub fn n_steps(&self) -> usize {
        (self.budget - self.initial_size()) / self.batch
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.batch == 0 {
            return bad("batch size must be at least 1");
        }
        if self.inducing == 0 {
            return bad("inducing count must be at least 1");
        }
        if self.initial_size() == 0 {
            return bad("initial design must contain at least one point");
        }
        if self.budget < self.initial_size() {
            return bad("budget must be at least the initial design size");
        }
        if self.candidate_pool == 0 || self.accuracy_grid == 0 {
            return bad("candidate pool and accuracy grid must be nonempty");
        }
        if self.model == ModelKind::ExactGp && self.budget > EXACT_GP_MAX_EVALS {
            return Err(Error::InvalidParameter(format!(
                "exact-GP runs are capped at {EXACT_GP_MAX_EVALS} evaluations (got budget {})",
                self.budget
            )));
        }
        if let IpaVariant::QualityDpp(QualitySpec::Ent { alpha }) = self.strategy {
            if !(alpha > 0.0 && alpha < 1.0) {
                return bad("ent alpha must lie strictly inside (0, 1)");
            }
        }
        self.schedule.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Cumulative evaluations after this step's batch.
    pub evals: usize,
    pub metric: f64,
    pub fit_s: f64,
    pub acq_s: f64,
    pub ipa_s: f64,
    /// The model fit failed and the previous model was reused.
    pub fit_failed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem: String,
    pub strategy: String,
    pub model: ModelKind,
    pub acquisition: Acquisition,
    pub inducing: usize,
    pub batch: usize,
    pub budget: usize,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    /// Queried input with the highest final posterior mean (problem coordinates).
    pub believed_optimum: Option<Vec<f64>>,
}

impl RunRecord {
    pub fn final_metric(&self) -> f64 {
        self.steps.last().map_or(f64::NAN, |s| s.metric)
    }

    pub fn total_overhead(&self) -> f64 {
        self.steps.iter().map(|s| s.fit_s + s.acq_s + s.ipa_s).sum()
    }
}
