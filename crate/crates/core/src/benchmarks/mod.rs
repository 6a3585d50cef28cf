//! Benchmark problems behind a common normalised, noisy, maximisation
//! interface.

pub mod functions;

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::Bounds;
use crate::error::{Error, Result};
use crate::optim::{maximize_box, LbfgsOptions};

pub const PROBLEM_NAMES: [&str; 7] = ["shekel4", "michalewicz5", "ackley5", "hartmann6", "rosenbrock4", "zdt3-4d", "classify2d"];
pub const NORMALIZATION_SAMPLES: usize = 100_000;
const NORMALIZATION_SEED: u64 = 0x5eed_0001;
/// ZDT3 hypervolume reference point in the native (minimisation) objectives.
pub const ZDT3_REFERENCE: [f64; 2] = [1.1, 1.1];
const ZDT3_GRID: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Shekel4,
    Michalewicz5,
    Ackley5,
    Hartmann6,
    Rosenbrock4,
    Zdt3,
    Classify2d,
}

impl ProblemKind {
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name.trim().to_ascii_lowercase().as_str() {
            "shekel4" => Self::Shekel4,
            "michalewicz5" => Self::Michalewicz5,
            "ackley5" => Self::Ackley5,
            "hartmann6" => Self::Hartmann6,
            "rosenbrock4" => Self::Rosenbrock4,
            "zdt3-4d" => Self::Zdt3,
            "classify2d" => Self::Classify2d,
            _ => {
                return Err(Error::UnknownProblem {
                    name: name.to_string(),
                    valid: PROBLEM_NAMES.join(", "),
                })
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Shekel4 => "shekel4",
            Self::Michalewicz5 => "michalewicz5",
            Self::Ackley5 => "ackley5",
            Self::Hartmann6 => "hartmann6",
            Self::Rosenbrock4 => "rosenbrock4",
            Self::Zdt3 => "zdt3-4d",
            Self::Classify2d => "classify2d",
        }
    }

    pub fn bounds(self) -> Bounds {
        match self {
            Self::Shekel4 => Bounds::cube(4, 0.0, 10.0),
            Self::Michalewicz5 => Bounds::cube(5, 0.0, std::f64::consts::PI),
            // Ackley is searched on the unit cube and stretched internally.
            Self::Ackley5 => Bounds::unit(5),
            Self::Hartmann6 => Bounds::unit(6),
            Self::Rosenbrock4 => Bounds::cube(4, -5.0, 10.0),
            Self::Zdt3 => Bounds::unit(4),
            Self::Classify2d => Bounds::unit(2),
        }
    }

    pub fn n_outputs(self) -> usize {
        if self == Self::Zdt3 {
            2
        } else {
            1
        }
    }

    fn default_noise(self) -> f64 {
        match self {
            Self::Hartmann6 => 0.1,
            Self::Classify2d => 0.0,
            _ => 0.01,
        }
    }

    /// Known minimiser, refined locally to obtain the optimum value.
    fn reference_minimiser(self) -> Option<Vec<f64>> {
        match self {
            Self::Shekel4 => Some(vec![4.0; 4]),
            Self::Michalewicz5 => Some(vec![2.202906, std::f64::consts::FRAC_PI_2, 1.284992, 1.923058, 1.720470]),
            Self::Ackley5 => Some(vec![0.5; 5]),
            Self::Hartmann6 => Some(vec![0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573]),
            Self::Rosenbrock4 => Some(vec![1.0; 4]),
            Self::Zdt3 | Self::Classify2d => None,
        }
    }

    /// Native outputs (minimisation form; the classification latent for
    /// `classify2d`). `x` must lie in [`ProblemKind::bounds`].
    pub fn raw(self, x: &[f64]) -> Vec<f64> {
        use functions::*;
        match self {
            Self::Shekel4 => vec![shekel4(x)],
            Self::Michalewicz5 => vec![michalewicz5(x)],
            Self::Ackley5 => {
                let s: Vec<f64> = x.iter().map(|u| -32.768 + 65.536 * u).collect();
                vec![ackley5(&s)]
            }
            Self::Hartmann6 => vec![hartmann6(x)],
            Self::Rosenbrock4 => vec![rosenbrock4(x)],
            Self::Zdt3 => zdt3_4d(x).to_vec(),
            Self::Classify2d => vec![classification_latent(x)],
        }
    }
}

/// A benchmark with normalisation constants, noise level and reference
/// optimum.
#[derive(Clone, Debug)]
pub struct Problem {
    pub kind: ProblemKind,
    pub bounds: Bounds,
    pub noise_var: f64,
    /// Per output `(mean, std)` of the native values under uniform inputs.
    pub normalization: Vec<(f64, f64)>,
    /// Maximum of the normalised noise-free objective, when single-objective.
    pub optimum: Option<f64>,
    /// Native-space minimiser achieving `optimum`.
    pub optimiser: Option<Vec<f64>>,
}

impl Problem {
    pub fn by_name(name: &str) -> Result<Self> {
        Self::new(ProblemKind::from_name(name)?)
    }

    pub fn new(kind: ProblemKind) -> Result<Self> {
        let bounds = kind.bounds();
        let normalization = if kind == ProblemKind::Classify2d {
            vec![(0.0, 1.0)]
        } else {
            normalization_constants(kind, &bounds, NORMALIZATION_SAMPLES, NORMALIZATION_SEED)
        };
        let mut p = Self {
            kind,
            bounds,
            noise_var: kind.default_noise(),
            normalization,
            optimum: None,
            optimiser: None,
        };
        if let Some(x0) = kind.reference_minimiser() {
            let (x, v) = p.refine_maximum(&x0);
            p.optimum = Some(v);
            p.optimiser = Some(x);
        }
        Ok(p)
    }

    pub fn with_noise(mut self, noise_var: f64) -> Self {
        self.noise_var = noise_var.max(0.0);
        self
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn n_outputs(&self) -> usize {
        self.kind.n_outputs()
    }

    pub fn is_classification(&self) -> bool {
        self.kind == ProblemKind::Classify2d
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if !self.bounds.contains(x) {
            return Err(Error::OutOfBounds);
        }
        Ok(())
    }

    fn normalise(&self, raw: Vec<f64>) -> Vec<f64> {
        if self.is_classification() {
            return raw;
        }
        raw.iter()
            .zip(&self.normalization)
            .map(|(v, (m, s))| -(v - m) / s)
            .collect()
    }

    /// Normalised noise-free outputs in maximisation form. For `classify2d`
    /// this is the latent `g`.
    pub fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(self.normalise(self.kind.raw(x)))
    }

    /// One noisy observation: normalised value plus Gaussian noise, or a
    /// `{0, 1}` label for `classify2d`.
    pub fn evaluate<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let v = self.value(x)?;
        if self.is_classification() {
            let p = crate::stats::norm_cdf(v[0]);
            return Ok(vec![if rng.random::<f64>() < p { 1.0 } else { 0.0 }]);
        }
        let sd = self.noise_var.sqrt();
        Ok(v.into_iter()
            .map(|f| if sd > 0.0 { f + sd * rng.sample::<f64, _>(StandardNormal) } else { f })
            .collect())
    }

    /// The Bayes label `1{g(x) > 0}`.
    pub fn true_label(&self, x: &[f64]) -> Result<f64> {
        let g = self.value(x)?[0];
        Ok(if g > 0.0 { 1.0 } else { 0.0 })
    }

    /// Projected L-BFGS on the normalised objective with central-difference
    /// gradients.
    pub fn refine_maximum(&self, x0: &[f64]) -> (Vec<f64>, f64) {
        let kind = self.kind;
        let (m, s) = self.normalization[0];
        let lo = &self.bounds.lower;
        let hi = &self.bounds.upper;
        let f = |x: &[f64]| -(kind.raw(x)[0] - m) / s;
        let objective = |x: &[f64], g: &mut [f64]| {
            let mut xp = x.to_vec();
            for k in 0..x.len() {
                let h = 1e-6 * (hi[k] - lo[k]);
                let a = (x[k] + h).min(hi[k]);
                let b = (x[k] - h).max(lo[k]);
                xp[k] = a;
                let fa = f(&xp);
                xp[k] = b;
                let fb = f(&xp);
                xp[k] = x[k];
                g[k] = (fa - fb) / (a - b);
            }
            f(x)
        };
        let opts = LbfgsOptions {
            max_iters: 200,
            gtol: 1e-10,
            ..LbfgsOptions::default()
        };
        maximize_box(objective, x0, lo, hi, opts)
    }

    /// Best normalised value found by refining the `starts` best of
    /// `pool` uniform points.
    pub fn multistart_maximum<R: Rng + ?Sized>(&self, pool: usize, starts: usize, rng: &mut R) -> f64 {
        let x = self.bounds.sample_matrix(pool, rng);
        let (m, s) = self.normalization[0];
        let mut scored: Vec<(f64, usize)> = (0..pool)
            .map(|i| {
                let row: Vec<f64> = x.row(i).iter().copied().collect();
                (-(self.kind.raw(&row)[0] - m) / s, i)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        scored
            .iter()
            .take(starts)
            .map(|&(_, i)| {
                let row: Vec<f64> = x.row(i).iter().copied().collect();
                self.refine_maximum(&row).1
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Mean and standard deviation of each native output under `n` uniform inputs.
pub fn normalization_constants(kind: ProblemKind, bounds: &Bounds, n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = kind.n_outputs();
    let mut sum = vec![0.0; k];
    let mut sum2 = vec![0.0; k];
    let mut x = vec![0.0; bounds.dim()];
    let mut vals = Vec::with_capacity(n);
    for _ in 0..n {
        for (v, (l, u)) in x.iter_mut().zip(bounds.lower.iter().zip(&bounds.upper)) {
            *v = rng.random_range(*l..=*u);
        }
        vals.push(kind.raw(&x));
    }
    for v in &vals {
        for j in 0..k {
            sum[j] += v[j];
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    for v in &vals {
        for j in 0..k {
            sum2[j] += (v[j] - mean[j]).powi(2);
        }
    }
    (0..k).map(|j| (mean[j], (sum2[j] / (n as f64 - 1.0)).sqrt())).collect()
}

/// Hypervolume of a two-objective maximisation front above `reference`.
/// Points not strictly dominating the reference contribute nothing.
pub fn hypervolume_2d(points: &[[f64; 2]], reference: [f64; 2]) -> f64 {
    let mut pts: Vec<[f64; 2]> = points
        .iter()
        .copied()
        .filter(|p| p[0] > reference[0] && p[1] > reference[1])
        .collect();
    pts.sort_by(|a, b| b[0].total_cmp(&a[0]).then(b[1].total_cmp(&a[1])));
    let mut hv = 0.0;
    let mut level = reference[1];
    for p in pts {
        if p[1] > level {
            hv += (p[0] - reference[0]) * (p[1] - level);
            level = p[1];
        }
    }
    hv
}

/// Indices of the rows of `values` (maximisation) not weakly dominated by
/// another row; among duplicates the first is kept.
pub fn nondominated(values: &[Vec<f64>]) -> Vec<usize> {
    let dominates = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y);
    (0..values.len())
        .filter(|&i| {
            !(0..values.len()).any(|j| {
                j != i && (dominates(&values[j], &values[i]) || (j < i && values[j] == values[i]))
            })
        })
        .collect()
}

/// ZDT3 objectives in maximisation form `(−f₁, −f₂)` and the matching
/// reference point.
pub fn zdt3_max_form(native: [f64; 2]) -> [f64; 2] {
    [-native[0], -native[1]]
}

pub fn zdt3_reference() -> [f64; 2] {
    zdt3_max_form(ZDT3_REFERENCE)
}

/// Hypervolume of the true ZDT3 front from a dense grid over `x₁` with `g = 1`.
pub fn zdt3_true_hypervolume() -> f64 {
    static HV: OnceLock<f64> = OnceLock::new();
    *HV.get_or_init(|| {
        let pts: Vec<[f64; 2]> = (0..ZDT3_GRID)
            .map(|i| {
                let x1 = i as f64 / (ZDT3_GRID - 1) as f64;
                zdt3_max_form(functions::zdt3_4d(&[x1, 0.0, 0.0, 0.0]))
            })
            .collect();
        hypervolume_2d(&pts, zdt3_reference())
    })
}

/// Dense front sample of ZDT3 inputs (`x₂..₄ = 0`).
pub fn zdt3_front_inputs(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, 4, |i, j| if j == 0 { i as f64 / (n - 1).max(1) as f64 } else { 0.0 })
}

/// The fixed `side × side` held-out grid for classification accuracy.
pub fn classification_grid(side: usize) -> DMatrix<f64> {
    DMatrix::from_fn(side * side, 2, |i, j| {
        let idx = if j == 0 { i % side } else { i / side };
        (idx as f64 + 0.5) / side as f64
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_resolve_and_unknowns_list_the_valid_set() {
        for n in PROBLEM_NAMES {
            assert_eq!(ProblemKind::from_name(n).unwrap().name(), n);
        }
        let err = ProblemKind::from_name("branin").unwrap_err().to_string();
        assert!(err.contains("shekel4") && err.contains("classify2d"));
    }

    #[test]
    fn hypervolume_basics() {
        assert_eq!(hypervolume_2d(&[[2.0, 3.0]], [0.0, 1.0]), 4.0);
        let base = hypervolume_2d(&[[2.0, 3.0], [3.0, 1.5]], [0.0, 0.0]);
        assert_eq!(hypervolume_2d(&[[2.0, 3.0], [3.0, 1.5], [1.0, 1.0]], [0.0, 0.0]), base);
        assert_eq!(hypervolume_2d(&[], [0.0, 0.0]), 0.0);
    }

    #[test]
    fn nondominated_filter() {
        let v = vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![0.5, 0.5], vec![1.0, 2.0]];
        assert_eq!(nondominated(&v), vec![0, 1]);
    }

    #[test]
    fn out_of_bounds_is_rejected() {
        let p = Problem::by_name("hartmann6").unwrap();
        assert_eq!(p.value(&[1.5, 0.0, 0.0, 0.0, 0.0, 0.0]), Err(Error::OutOfBounds));
        assert!(p.value(&[0.5; 5]).is_err());
    }
}
