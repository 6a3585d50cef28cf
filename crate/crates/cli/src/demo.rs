//! Inducing-point allocation demo on a two-dimensional problem or slice.
//!
//! Writes one CSV with `kind,x1,x2,y,quality,mean,var` rows: the `N`
//! candidates (with their observations and quality), the `M` selected
//! inducing points, and a `side × side` grid carrying the posterior mean and
//! latent variance of an SVGP built on the selected inducing points. Empty
//! fields mean "not applicable".

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ipalloc::benchmarks::Problem;
use ipalloc::gp::{fit_exact_gp, ExactFitOptions, OutputTransform};
use ipalloc::svgp::{Likelihood, SvgpState};
use ipalloc::{allocate, Bounds, Dataset, IpaStrategy, IpaVariant, KernelFamily, KernelParams};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{CliError, Result};
use crate::output::{write_atomic, SCHEMA_LINE};

pub const DEMO_HEADER: &str = "kind,x1,x2,y,quality,mean,var";

#[derive(Clone, Debug)]
pub struct DemoArgs {
    pub problem: String,
    pub strategy: String,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub grid: usize,
    pub output: PathBuf,
}

pub struct DemoOutput {
    pub csv: String,
    /// Candidate rows chosen as inducing points, when the strategy selects data.
    pub selected: Option<Vec<usize>>,
    pub rows: usize,
}

/// Maps the free coordinates of a unit-cube slice into a full problem input:
/// the first one or two coordinates vary, the rest sit at the optimiser.
struct Slice {
    problem: Problem,
    free: usize,
    anchor: Vec<f64>,
}

impl Slice {
    fn new(problem: Problem) -> Result<Self> {
        if problem.n_outputs() != 1 {
            return Err(CliError::Config(format!("ipa-demo needs a single-output problem ('{}' has {})", problem.name(), problem.n_outputs())));
        }
        let d = problem.dim();
        let anchor = problem
            .optimiser
            .clone()
            .map(|x| problem.bounds.to_unit(&x))
            .unwrap_or_else(|| vec![0.5; d]);
        Ok(Self {
            free: d.min(2),
            problem,
            anchor,
        })
    }

    fn native(&self, u: &[f64]) -> Vec<f64> {
        let mut full = self.anchor.clone();
        full[..self.free].copy_from_slice(&u[..self.free]);
        self.problem.bounds.from_unit(&full)
    }

    /// Noise-free value: normalised maximisation form, or the latent field
    /// for the classification problem.
    fn value(&self, u: &[f64]) -> Result<f64> {
        Ok(self.problem.value(&self.native(u))?[0])
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

fn push_row(out: &mut String, kind: &str, x: &[f64], y: Option<f64>, q: Option<f64>, mean: Option<f64>, var: Option<f64>) {
    let x2 = x.get(1).copied();
    writeln!(out, "{kind},{},{},{},{},{},{}", cell(Some(x[0])), cell(x2), cell(y), cell(q), cell(mean), cell(var)).unwrap();
}

pub fn ipa_demo(args: &DemoArgs) -> Result<DemoOutput> {
    if args.n == 0 || args.m == 0 || args.grid == 0 {
        return Err(CliError::Config("N, M and the grid side must be at least 1".into()));
    }
    let variant: IpaVariant = args
        .strategy
        .parse()
        .map_err(|e| CliError::Config(format!("strategy '{}': {e}", args.strategy)))?;
    let slice = Slice::new(Problem::by_name(&args.problem)?)?;
    let d = slice.free;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(args.seed);
    noise_rng.set_stream(1);

    let bounds = Bounds::unit(d);
    let x = bounds.sample_matrix(args.n, &mut rng);
    let sd = slice.problem.noise_var.sqrt();
    let y = (0..args.n)
        .map(|i| {
            let u: Vec<f64> = x.row(i).iter().copied().collect();
            Ok(slice.value(&u)? + sd * noise_rng.sample::<f64, _>(StandardNormal))
        })
        .collect::<Result<Vec<f64>>>()?;
    let data = Dataset::new(x.clone(), DVector::from_vec(y.clone()))?;

    // Hyperparameters from an exact GP on all candidates; its Z = X
    // variational twin supplies the qualities.
    let init = KernelParams::new(KernelFamily::Matern52, vec![0.2 * (d as f64).sqrt(); d], 1.0)?;
    let gp = fit_exact_gp(&data, &init, 0.05, ExactFitOptions::default(), &mut rng)?;
    let kernel = gp.kernel().clone();
    let noise = gp.noise().max(1e-6);
    let model_on = |z: DMatrix<f64>| -> Result<SvgpState> {
        let mut s = SvgpState::new(z, kernel.clone(), Likelihood::Gaussian { noise }, true)?;
        s.transform = OutputTransform::standardizing(&y);
        s.set_optimal_variational(&data)?;
        Ok(s)
    };
    let full = model_on(x.clone())?;
    let strategy = IpaStrategy::new(variant, args.m).map_err(|e| CliError::Config(e.to_string()))?;
    let alloc = allocate(&strategy, &data, &[&full], &kernel, &bounds, &mut rng)?;
    let sparse = model_on(alloc.z.clone())?;

    let side = args.grid;
    let n_grid = if d == 1 { side } else { side * side };
    let grid = DMatrix::from_fn(n_grid, d, |i, j| {
        let k = if j == 0 { i % side } else { i / side };
        (k as f64 + 0.5) / side as f64
    });
    let (mean, var) = sparse.predict(&grid)?;

    let mut csv = format!("{SCHEMA_LINE}\n{DEMO_HEADER}\n");
    let q = alloc.quality.as_deref();
    for i in 0..args.n {
        let row: Vec<f64> = x.row(i).iter().copied().collect();
        push_row(&mut csv, "candidate", &row, Some(y[i]), q.map(|q| q[i]), None, None);
    }
    for k in 0..alloc.z.nrows() {
        let row: Vec<f64> = alloc.z.row(k).iter().copied().collect();
        let src = alloc.indices.as_ref().map(|idx| idx[k]);
        push_row(&mut csv, "inducing", &row, src.map(|i| y[i]), src.and_then(|i| q.map(|q| q[i])), None, None);
    }
    for i in 0..n_grid {
        let row: Vec<f64> = grid.row(i).iter().copied().collect();
        push_row(&mut csv, "grid", &row, None, None, Some(mean[i]), Some(var[i]));
    }
    Ok(DemoOutput {
        rows: args.n + alloc.z.nrows() + n_grid,
        selected: alloc.indices,
        csv,
    })
}

pub fn write_demo(args: &DemoArgs) -> Result<(DemoOutput, &Path)> {
    let out = ipa_demo(args)?;
    write_atomic(&args.output, out.csv.as_bytes())?;
    Ok((out, &args.output))
}
