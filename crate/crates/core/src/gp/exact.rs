//! Exact GP regression with a Gaussian likelihood.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{KernelParams, OutputTransform};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{factorize, SpdFactor};
use crate::optim::Adam;

/// Bounds applied to hyperparameters during fitting.
pub(crate) const LOG_NOISE_MIN: f64 = -13.815510557964274; // ln 1e-6
pub(crate) const LOG_NOISE_MAX: f64 = std::f64::consts::LN_10;
pub(crate) const LOG_AMP_MIN: f64 = -13.815510557964274;
pub(crate) const LOG_AMP_MAX: f64 = 9.210340371976184; // ln 1e4
pub(crate) const LOG_LS_MIN: f64 = -6.907755278982137; // ln 1e-3
pub(crate) const LOG_LS_MAX: f64 = 6.907755278982137;

/// A conditioned GP. Observations are held in model units (after `transform`).
#[derive(Clone, Debug)]
pub struct ExactGp {
    kernel: KernelParams,
    noise: f64,
    x: DMatrix<f64>,
    y: DVector<f64>,
    transform: OutputTransform,
    factor: Option<SpdFactor>,
    alpha: DVector<f64>,
}

impl ExactGp {
    /// Conditions on `data` as given (no standardisation).
    pub fn new(kernel: KernelParams, noise: f64, data: &Dataset) -> Result<Self> {
        Self::with_transform(kernel, noise, data, OutputTransform::default())
    }

    pub fn with_transform(kernel: KernelParams, noise: f64, data: &Dataset, transform: OutputTransform) -> Result<Self> {
        if !(noise > 0.0 && noise.is_finite()) {
            return Err(Error::InvalidParameter("noise variance must be positive".into()));
        }
        if data.dim() != kernel.dim() {
            return Err(Error::DimensionMismatch {
                expected: kernel.dim(),
                got: data.dim(),
            });
        }
        let y = data.y.map(|v| transform.forward(v));
        let (factor, alpha) = if data.is_empty() {
            (None, DVector::zeros(0))
        } else {
            let mut k = kernel.gram(&data.x)?;
            for i in 0..k.nrows() {
                k[(i, i)] += noise;
            }
            let f = factorize(&k, 0.0)?;
            let a = f.solve_vec(&y)?;
            (Some(f), a)
        };
        Ok(Self {
            kernel,
            noise,
            x: data.x.clone(),
            y,
            transform,
            factor,
            alpha,
        })
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn transform(&self) -> OutputTransform {
        self.transform
    }

    pub fn n_train(&self) -> usize {
        self.x.nrows()
    }

    pub fn train_x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Training targets in model units.
    pub fn train_y(&self) -> &DVector<f64> {
        &self.y
    }

    pub(crate) fn factor(&self) -> Option<&SpdFactor> {
        self.factor.as_ref()
    }

    /// Latent posterior in model units: mean and full covariance.
    pub fn latent_posterior(&self, xs: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let kss = self.kernel.gram(xs)?;
        let Some(f) = &self.factor else {
            return Ok((DVector::zeros(xs.nrows()), kss));
        };
        let kxs = self.kernel.matrix(&self.x, xs)?;
        let mean = kxs.tr_mul(&self.alpha);
        let v = f.solve_lower(&kxs)?;
        let mut cov = kss - v.tr_mul(&v);
        for i in 0..cov.nrows() {
            cov[(i, i)] = cov[(i, i)].max(0.0);
        }
        Ok((mean, cov))
    }

    /// Latent mean and variance in model units.
    pub fn latent_predict(&self, xs: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let a2 = self.kernel.amplitude2();
        if xs.ncols() != self.kernel.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.kernel.dim(),
                got: xs.ncols(),
            });
        }
        let Some(f) = &self.factor else {
            return Ok((DVector::zeros(xs.nrows()), DVector::from_element(xs.nrows(), a2)));
        };
        let kxs = self.kernel.matrix_unchecked(&self.x, xs);
        let mean = kxs.tr_mul(&self.alpha);
        let v = f.solve_lower(&kxs)?;
        let var = DVector::from_iterator(
            xs.nrows(),
            (0..xs.nrows()).map(|j| (a2 - v.column(j).norm_squared()).max(0.0)),
        );
        Ok((mean, var))
    }

    /// Posterior over the noise-free function in observation units.
    pub fn posterior(&self, xs: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (m, c) = self.latent_posterior(xs)?;
        let t = self.transform;
        Ok((m.map(|v| t.inverse(v)), c * (t.scale * t.scale)))
    }

    /// Mean and variance of the noise-free function in observation units.
    pub fn predict(&self, xs: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let (m, v) = self.latent_predict(xs)?;
        let t = self.transform;
        Ok((m.map(|v| t.inverse(v)), v * (t.scale * t.scale)))
    }

    /// `log p(y | X, θ)` in model units.
    pub fn log_marginal_likelihood(&self) -> Result<f64> {
        let Some(f) = &self.factor else {
            return Err(Error::EmptyData);
        };
        let n = self.y.len() as f64;
        let v = -0.5 * self.y.dot(&self.alpha) - 0.5 * f.logdet() - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("log marginal likelihood"))
        }
    }

    /// Gradient over `[log ℓ_1..d, log a², log σ²]`.
    pub fn log_marginal_likelihood_grad(&self) -> Result<Vec<f64>> {
        let Some(f) = &self.factor else {
            return Err(Error::EmptyData);
        };
        let kinv = f.inverse();
        let mut w = &self.alpha * self.alpha.transpose() - &kinv;
        w *= 0.5;
        let np = self.kernel.n_params();
        let mut g = vec![0.0; np + 1];
        self.kernel.contract_grad(&self.x, &self.x, &w, &mut g[..np]);
        g[np] = 0.5 * self.noise * (self.alpha.norm_squared() - kinv.trace());
        if g.iter().all(|v| v.is_finite()) {
            Ok(g)
        } else {
            Err(Error::NonFinite("log marginal likelihood gradient"))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExactFitOptions {
    pub iterations: usize,
    pub learning_rate: f64,
    pub restarts: usize,
    pub standardize: bool,
}

impl Default for ExactFitOptions {
    fn default() -> Self {
        Self {
            iterations: 100,
            learning_rate: 0.15,
            restarts: 3,
            standardize: true,
        }
    }
}

fn pack(kernel: &KernelParams, noise: f64) -> Vec<f64> {
    let mut p = kernel.log_params();
    p.push(noise.ln());
    p
}

fn clamp_params(p: &mut [f64]) {
    let n = p.len();
    for v in &mut p[..n - 2] {
        *v = v.clamp(LOG_LS_MIN, LOG_LS_MAX);
    }
    p[n - 2] = p[n - 2].clamp(LOG_AMP_MIN, LOG_AMP_MAX);
    p[n - 1] = p[n - 1].clamp(LOG_NOISE_MIN, LOG_NOISE_MAX);
}

/// Maximises the log marginal likelihood by Adam in log space from `init`
/// and from `restarts − 1` random perturbations of it; returns the best fit.
pub fn fit_exact_gp<R: Rng + ?Sized>(
    data: &Dataset,
    init: &KernelParams,
    noise_init: f64,
    opts: ExactFitOptions,
    rng: &mut R,
) -> Result<ExactGp> {
    if data.len() < 2 {
        return Err(Error::EmptyData);
    }
    let transform = if opts.standardize {
        OutputTransform::standardizing(data.y.as_slice())
    } else {
        OutputTransform::default()
    };
    let p0 = pack(init, noise_init);
    let mut best: Option<(f64, ExactGp)> = None;
    for r in 0..opts.restarts.max(1) {
        let mut p = p0.clone();
        if r > 0 {
            for v in &mut p {
                *v += rng.random_range(-1.5..1.5);
            }
        }
        clamp_params(&mut p);
        let np = p.len();
        let build = |p: &[f64]| {
            ExactGp::with_transform(init.with_log_params(&p[..np - 1]), p[np - 1].exp(), data, transform)
        };
        let mut adam = Adam::new(np, opts.learning_rate);
        let mut run_best: Option<(f64, ExactGp)> = None;
        for _ in 0..=opts.iterations {
            let Ok(gp) = build(&p) else { break };
            let (Ok(lml), Ok(g)) = (gp.log_marginal_likelihood(), gp.log_marginal_likelihood_grad()) else {
                break;
            };
            let grad = g;
            if run_best.as_ref().is_none_or(|(b, _)| lml > *b) {
                run_best = Some((lml, gp));
            }
            adam.ascend(&mut p, &grad);
            clamp_params(&mut p);
        }
        if let Some((lml, gp)) = run_best {
            if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                best = Some((lml, gp));
            }
        }
    }
    best.map(|(_, gp)| gp).ok_or(Error::NonFinite("log marginal likelihood"))
}
