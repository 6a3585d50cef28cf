use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::metrics::{classification_accuracy, hypervolume_difference, simple_regret};
use super::{Acquisition, BoConfig, ModelKind, RunRecord, StepRecord};
use crate::acq::{self, BatchRequest};
use crate::benchmarks::{classification_grid, zdt3_true_hypervolume, Problem};
use crate::data::{row_vec, Bounds, Dataset};
use crate::error::{Error, Result};
use crate::gp::{fit_exact_gp, ExactGp, KernelParams, OutputTransform};
use crate::ipa::{self, IpaStrategy, IpaVariant, QualitySpec};
use crate::numerics::greedy_select_with_residuals;
use crate::svgp::{train, Likelihood, SvgpState};

const NOISE_INIT: f64 = 0.05;
const CLASSIFIER_AMPLITUDE_INIT: f64 = 2.0;

/// A fitted surrogate for one objective.
#[derive(Clone, Debug)]
pub enum Surrogate {
    Svgp(SvgpState),
    Exact(ExactGp),
}

impl Surrogate {
    /// Posterior mean in observation units.
    pub fn mean(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        match self {
            Surrogate::Svgp(s) => Ok(s.predict(x)?.0),
            Surrogate::Exact(g) => Ok(g.predict(x)?.0),
        }
    }

    pub fn kernel(&self) -> &KernelParams {
        match self {
            Surrogate::Svgp(s) => &s.kernel,
            Surrogate::Exact(g) => g.kernel(),
        }
    }

    pub fn noise(&self) -> Option<f64> {
        match self {
            Surrogate::Svgp(s) => s.noise(),
            Surrogate::Exact(g) => Some(g.noise()),
        }
    }

    pub fn as_svgp(&self) -> Option<&SvgpState> {
        match self {
            Surrogate::Svgp(s) => Some(s),
            Surrogate::Exact(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Task {
    Single,
    Classification,
    Multi,
}

fn task_of(problem: &Problem) -> Task {
    if problem.is_classification() {
        Task::Classification
    } else if problem.n_outputs() > 1 {
        Task::Multi
    } else {
        Task::Single
    }
}

/// Everything queried so far, in unit-cube coordinates.
struct Archive {
    x: DMatrix<f64>,
    /// Observations per output.
    y: Vec<Vec<f64>>,
    /// Noise-free values per point: normalised for single-objective
    /// problems, native objectives for multi-objective ones.
    truth: Vec<Vec<f64>>,
}

impl Archive {
    fn len(&self) -> usize {
        self.x.nrows()
    }

    fn dataset(&self, k: usize) -> Dataset {
        Dataset {
            x: self.x.clone(),
            y: DVector::from_column_slice(&self.y[k]),
        }
    }

    fn observe(&mut self, problem: &Problem, task: Task, x: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> Result<()> {
        let mut rows = Vec::with_capacity(x.nrows());
        for i in 0..x.nrows() {
            let native = problem.bounds.from_unit(&row_vec(x, i));
            let obs = problem.evaluate(&native, rng)?;
            for (k, v) in obs.iter().enumerate() {
                self.y[k].push(*v);
            }
            self.truth.push(match task {
                Task::Multi => problem.kind.raw(&native),
                _ => problem.value(&native)?,
            });
            rows.push(native);
        }
        let n = self.x.nrows();
        let d = self.x.ncols();
        let mut grown = self.x.clone().resize_vertically(n + x.nrows(), 0.0);
        grown.view_mut((n, 0), (x.nrows(), d)).copy_from(x);
        self.x = grown;
        Ok(())
    }
}

fn initial_kernel(cfg: &BoConfig, task: Task, d: usize) -> Result<KernelParams> {
    let amp = if task == Task::Classification { CLASSIFIER_AMPLITUDE_INIT } else { 1.0 };
    KernelParams::new(cfg.kernel, vec![0.2 * (d as f64).sqrt(); d], amp)
}

fn fit_svgp(
    prev: Option<&SvgpState>,
    z: DMatrix<f64>,
    data: &Dataset,
    task: Task,
    init: &KernelParams,
    cfg: &BoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SvgpState> {
    let start = if task == Task::Classification {
        match prev {
            Some(p) => p.reinduce(z, p.kernel.clone())?,
            None => SvgpState::new(z, init.clone(), Likelihood::BernoulliProbit, true)?,
        }
    } else {
        // Warm start: previous hyperparameters with the collapsed optimum for q(u).
        let kernel = prev.map_or_else(|| init.clone(), |p| p.kernel.clone());
        let noise = prev.and_then(SvgpState::noise).unwrap_or(NOISE_INIT);
        let mut s = SvgpState::new(z, kernel, Likelihood::Gaussian { noise }, true)?;
        s.transform = OutputTransform::standardizing(data.y.as_slice());
        s.set_optimal_variational(data)?;
        s
    };
    let (state, report) = train(&start, data, &cfg.schedule, rng)?;
    if !report.best_elbo.is_finite() {
        return Err(Error::NonFinite("ELBO"));
    }
    log::debug!(
        "fit n={} epochs={} elbo {:.2} -> {:.2} lengthscales {:?} amplitude2 {:.3} noise {:?}",
        data.len(),
        report.epochs,
        report.initial_elbo,
        report.best_elbo,
        state.kernel.lengthscales(),
        state.kernel.amplitude2(),
        state.noise()
    );
    Ok(state)
}

/// Inducing sets for every output. Before any model exists the
/// model-dependent qualities fall back to unit quality.
fn allocate_all(
    cfg: &BoConfig,
    archive: &Archive,
    prev: Option<&[Surrogate]>,
    init: &KernelParams,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<DMatrix<f64>>> {
    let n_out = archive.y.len();
    let variant = match (cfg.strategy, prev) {
        (IpaVariant::QualityDpp(spec), None) if spec.needs_model() => IpaVariant::QualityDpp(QualitySpec::Constant),
        (v, _) => v,
    };
    let strategy = IpaStrategy::new(variant, cfg.inducing)?;
    let svgps: Vec<&SvgpState> = prev.map_or_else(Vec::new, |p| p.iter().filter_map(Surrogate::as_svgp).collect());
    let kernel_of = |k: usize| prev.map_or(init, |p| p[k].kernel());
    let bounds = Bounds::unit(archive.x.ncols());

    if n_out > 1 {
        if let IpaVariant::QualityDpp(spec) = variant {
            // One quality vector shared by every objective's allocation.
            let data = archive.dataset(0);
            if data.len() <= cfg.inducing {
                return Ok(vec![data.x.clone(); n_out]);
            }
            let q = ipa::evaluate_quality(&spec, &data, &svgps, cfg.inducing, &bounds, rng)?;
            return (0..n_out)
                .map(|k| {
                    let (idx, _) = greedy_select_with_residuals(&data.x, kernel_of(k), &q, cfg.inducing)?;
                    Ok(data.x.select_rows(&idx))
                })
                .collect();
        }
    }
    (0..n_out)
        .map(|k| {
            let data = archive.dataset(k);
            let models: Vec<&SvgpState> = if n_out > 1 { svgps.clone() } else { svgps.iter().copied().take(1).collect() };
            Ok(ipa::allocate(&strategy, &data, &models, kernel_of(k), &bounds, rng)?.z)
        })
        .collect()
}

struct Fitted {
    models: Vec<Surrogate>,
    ipa_s: f64,
    fit_s: f64,
}

fn fit_models(
    cfg: &BoConfig,
    task: Task,
    archive: &Archive,
    prev: Option<&[Surrogate]>,
    init: &KernelParams,
    rng: &mut ChaCha8Rng,
) -> Result<Fitted> {
    if cfg.model == ModelKind::ExactGp {
        let started = Instant::now();
        let data = archive.dataset(0);
        let (kernel, noise) = match prev {
            Some(p) => (p[0].kernel().clone(), p[0].noise().unwrap_or(NOISE_INIT)),
            None => (init.clone(), NOISE_INIT),
        };
        let gp = fit_exact_gp(&data, &kernel, noise, cfg.exact, rng)?;
        return Ok(Fitted {
            models: vec![Surrogate::Exact(gp)],
            ipa_s: 0.0,
            fit_s: started.elapsed().as_secs_f64(),
        });
    }
    let started = Instant::now();
    let zs = allocate_all(cfg, archive, prev, init, rng)?;
    let ipa_s = started.elapsed().as_secs_f64();
    let started = Instant::now();
    let mut models = Vec::with_capacity(zs.len());
    for (k, z) in zs.into_iter().enumerate() {
        let prev_k = prev.and_then(|p| p[k].as_svgp());
        let s = fit_svgp(prev_k, z, &archive.dataset(k), task, init, cfg, rng)?;
        models.push(Surrogate::Svgp(s));
    }
    Ok(Fitted {
        models,
        ipa_s,
        fit_s: started.elapsed().as_secs_f64(),
    })
}

fn acquire(
    cfg: &BoConfig,
    task: Task,
    models: &[Surrogate],
    archive: &Archive,
    rng: &mut ChaCha8Rng,
) -> Result<DMatrix<f64>> {
    let bounds = Bounds::unit(archive.x.ncols());
    let req: &BatchRequest = &cfg.request;
    let b = cfg.batch;
    let mut x = match (task, &models[0]) {
        (Task::Single, Surrogate::Svgp(s)) => acq::thompson_batch(s, b, &bounds, req, rng)?,
        (Task::Single, Surrogate::Exact(g)) => acq::thompson_batch(g, b, &bounds, req, rng)?,
        (Task::Classification, Surrogate::Svgp(s)) => {
            let pool = bounds.sample_matrix(cfg.candidate_pool, rng);
            let scores = acq::bald(s, &pool)?;
            pool.select_rows(&acq::top_k(&scores, b))
        }
        (Task::Multi, _) => {
            let svgps: Vec<&SvgpState> = models.iter().filter_map(Surrogate::as_svgp).collect();
            let refs = svgps.iter().map(|s| acq::min_mean_reference(s)).collect::<Result<Vec<_>>>()?;
            acq::chebyshev_ts_batch(&svgps, &refs, b, &bounds, req, rng)?
        }
        _ => return Err(Error::InvalidParameter("task needs an SVGP surrogate".into())),
    };
    acq::perturb_duplicates(&mut x, Some(&archive.x), &bounds, rng);
    Ok(x)
}

struct Evaluator {
    task: Task,
    optimum: Option<f64>,
    grid: Option<(DMatrix<f64>, Vec<f64>)>,
}

impl Evaluator {
    fn new(cfg: &BoConfig, problem: &Problem, task: Task) -> Result<Self> {
        let grid = if task == Task::Classification {
            let g = classification_grid(cfg.accuracy_grid);
            let labels = (0..g.nrows())
                .map(|i| problem.true_label(&problem.bounds.from_unit(&row_vec(&g, i))))
                .collect::<Result<Vec<_>>>()?;
            Some((g, labels))
        } else {
            None
        };
        Ok(Self {
            task,
            optimum: problem.optimum,
            grid,
        })
    }

    fn metric(&self, models: &[Surrogate], archive: &Archive) -> Result<f64> {
        match self.task {
            Task::Single => {
                let means = models[0].mean(&archive.x)?;
                let truth: Vec<f64> = archive.truth.iter().map(|t| t[0]).collect();
                let opt = self.optimum.ok_or(Error::MissingModel)?;
                Ok(simple_regret(means.as_slice(), &truth, opt)?.0)
            }
            Task::Classification => {
                let (g, labels) = self.grid.as_ref().expect("classification grid");
                let s = models[0].as_svgp().ok_or(Error::LikelihoodMismatch)?;
                let p = s.predict_class_probability(g)?;
                Ok(classification_accuracy(p.as_slice(), labels))
            }
            Task::Multi => {
                let means: Vec<DVector<f64>> = models.iter().map(|m| m.mean(&archive.x)).collect::<Result<_>>()?;
                let per_point: Vec<Vec<f64>> = (0..archive.len()).map(|i| means.iter().map(|m| m[i]).collect()).collect();
                let native: Vec<[f64; 2]> = archive.truth.iter().map(|t| [t[0], t[1]]).collect();
                Ok(hypervolume_difference(&per_point, &native, zdt3_true_hypervolume()))
            }
        }
    }
}

fn check_compatible(cfg: &BoConfig, task: Task) -> Result<()> {
    let expected = match task {
        Task::Single => Acquisition::Thompson,
        Task::Classification => Acquisition::BaldTopk,
        Task::Multi => Acquisition::ChebyshevTs,
    };
    if cfg.acquisition != expected {
        return Err(Error::InvalidParameter(format!(
            "acquisition '{}' does not fit this problem (expected '{expected}')",
            cfg.acquisition
        )));
    }
    if task != Task::Single && cfg.model == ModelKind::ExactGp {
        return Err(Error::InvalidParameter("exact-GP surrogates support single-objective problems only".into()));
    }
    if cfg.model == ModelKind::ExactGp && cfg.initial_size() < 2 {
        return Err(Error::InvalidParameter("exact-GP runs need an initial design of at least 2 points".into()));
    }
    Ok(())
}

/// Runs the loop appropriate to `problem` (single-objective BO, active
/// learning or multi-objective BO).
///
/// Row 0 reports the initial model. Step `n` allocates inducing points from
/// the data and model of step `n − 1`, refits on the data available before
/// its batch, acquires and evaluates the batch. Its metric comes from the
/// model fitted on the data including that batch, which is the next step's
/// model (one extra fit is made after the last batch). Observation noise
/// uses its own random stream so that every strategy sees the same design
/// and noise for a given seed.
pub fn run(cfg: &BoConfig, problem: &Problem, seed: u64) -> Result<RunRecord> {
    cfg.validate()?;
    let task = task_of(problem);
    check_compatible(cfg, task)?;
    let d = problem.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(1);

    let init = initial_kernel(cfg, task, d)?;
    let evaluator = Evaluator::new(cfg, problem, task)?;
    let mut archive = Archive {
        x: DMatrix::zeros(0, d),
        y: vec![Vec::new(); problem.n_outputs()],
        truth: Vec::new(),
    };
    let design = Bounds::unit(d).sample_matrix(cfg.initial_size(), &mut rng);
    archive.observe(problem, task, &design, &mut noise_rng)?;

    let first = fit_models(cfg, task, &archive, None, &init, &mut rng)?;
    let mut rows = vec![StepRecord {
        step: 0,
        evals: archive.len(),
        metric: evaluator.metric(&first.models, &archive)?,
        fit_s: first.fit_s,
        acq_s: 0.0,
        ipa_s: first.ipa_s,
        fit_failed: false,
    }];
    let mut current = first.models;
    let steps = cfg.n_steps();
    for n in 1..=steps + 1 {
        if steps == 0 {
            break;
        }
        let (models, ipa_s, fit_s, failed) = match fit_models(cfg, task, &archive, Some(&current), &init, &mut rng) {
            Ok(f) => (f.models, f.ipa_s, f.fit_s, false),
            Err(e) => {
                log::warn!("step {n}: model fit failed ({e}); reusing the previous model");
                (current.clone(), 0.0, 0.0, true)
            }
        };
        if n >= 2 {
            rows[n - 1].metric = evaluator.metric(&models, &archive)?;
        }
        current = models;
        if n == steps + 1 {
            break;
        }
        let started = Instant::now();
        let batch = acquire(cfg, task, &current, &archive, &mut rng)?;
        let acq_s = started.elapsed().as_secs_f64();
        archive.observe(problem, task, &batch, &mut noise_rng)?;
        rows.push(StepRecord {
            step: n,
            evals: archive.len(),
            metric: f64::NAN,
            fit_s,
            acq_s,
            ipa_s,
            fit_failed: failed,
        });
    }

    let believed_optimum = if task == Task::Single {
        let means = current[0].mean(&archive.x)?;
        Some(problem.bounds.from_unit(&row_vec(&archive.x, means.imax())))
    } else {
        None
    };
    Ok(RunRecord {
        problem: problem.name().to_string(),
        strategy: cfg.strategy.to_string(),
        model: cfg.model,
        acquisition: cfg.acquisition,
        inducing: cfg.inducing,
        batch: cfg.batch,
        budget: cfg.budget,
        seed,
        steps: rows,
        believed_optimum,
    })
}

pub fn run_bo(cfg: &BoConfig, problem: &Problem, seed: u64) -> Result<RunRecord> {
    if task_of(problem) != Task::Single {
        return Err(Error::InvalidParameter(format!("'{}' is not a single-objective problem", problem.name())));
    }
    run(cfg, problem, seed)
}

pub fn run_active_learning(cfg: &BoConfig, problem: &Problem, seed: u64) -> Result<RunRecord> {
    if task_of(problem) != Task::Classification {
        return Err(Error::InvalidParameter(format!("'{}' is not a classification problem", problem.name())));
    }
    run(cfg, problem, seed)
}

pub fn run_moo(cfg: &BoConfig, problem: &Problem, seed: u64) -> Result<RunRecord> {
    if task_of(problem) != Task::Multi {
        return Err(Error::InvalidParameter(format!("'{}' is not a multi-objective problem", problem.name())));
    }
    run(cfg, problem, seed)
}
