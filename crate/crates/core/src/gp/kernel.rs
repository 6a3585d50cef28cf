//! Stationary ARD kernels with hyperparameter and input gradients.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    SquaredExponential,
    Matern52,
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared-exponential" | "se" | "rbf" => Ok(Self::SquaredExponential),
            "matern-5/2" | "matern52" => Ok(Self::Matern52),
            other => Err(Error::InvalidParameter(format!("unknown kernel family `{other}`"))),
        }
    }
}

/// Kernel family with one lengthscale per input dimension and a signal variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    family: KernelFamily,
    lengthscales: Vec<f64>,
    amplitude2: f64,
}

const SQRT5: f64 = 2.236_067_977_499_79;

impl KernelParams {
    pub fn new(family: KernelFamily, lengthscales: Vec<f64>, amplitude2: f64) -> Result<Self> {
        if lengthscales.is_empty() {
            return Err(Error::InvalidParameter("kernel needs at least one lengthscale".into()));
        }
        if lengthscales.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::InvalidParameter("lengthscales must be positive".into()));
        }
        if !(amplitude2.is_finite() && amplitude2 > 0.0) {
            return Err(Error::InvalidParameter("amplitude² must be positive".into()));
        }
        Ok(Self {
            family,
            lengthscales,
            amplitude2,
        })
    }

    pub fn isotropic(family: KernelFamily, dim: usize, lengthscale: f64, amplitude2: f64) -> Result<Self> {
        Self::new(family, vec![lengthscale; dim], amplitude2)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn amplitude2(&self) -> f64 {
        self.amplitude2
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// Number of hyperparameters: `d` log-lengthscales plus log-amplitude².
    pub fn n_params(&self) -> usize {
        self.dim() + 1
    }

    pub fn log_params(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.lengthscales.iter().map(|l| l.ln()).collect();
        p.push(self.amplitude2.ln());
        p
    }

    pub fn with_log_params(&self, p: &[f64]) -> Self {
        debug_assert_eq!(p.len(), self.n_params());
        Self {
            family: self.family,
            lengthscales: p[..self.dim()].iter().map(|v| v.exp()).collect(),
            amplitude2: p[self.dim()].exp(),
        }
    }

    pub fn with_amplitude2(&self, amplitude2: f64) -> Self {
        Self {
            amplitude2,
            ..self.clone()
        }
    }

    /// `(k, rho)` for a scaled squared distance `s`, where
    /// `∂k/∂log ℓ_d = rho · Δ_d²/ℓ_d²` and `∂k/∂x_d = −rho · Δ_d/ℓ_d²`.
    #[inline]
    pub(crate) fn profile(&self, s: f64) -> (f64, f64) {
        match self.family {
            KernelFamily::SquaredExponential => {
                let k = self.amplitude2 * (-0.5 * s).exp();
                (k, k)
            }
            KernelFamily::Matern52 => {
                let t = SQRT5 * s.max(0.0).sqrt();
                let e = (-t).exp();
                let k = self.amplitude2 * (1.0 + t + t * t / 3.0) * e;
                let rho = self.amplitude2 * (5.0 / 3.0) * (1.0 + t) * e;
                (k, rho)
            }
        }
    }

    #[inline]
    fn scaled_sq_dist(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .zip(&self.lengthscales)
            .map(|((a, b), l)| {
                let d = (a - b) / l;
                d * d
            })
            .sum()
    }

    /// Kernel value for two points.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        self.check_dim(y.len())?;
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        self.profile(self.scaled_sq_dist(x, y)).0
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }

    /// Copies the rows of `m` divided by the lengthscales into a row-major buffer.
    pub(crate) fn scaled_rows(&self, m: &DMatrix<f64>) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; m.nrows() * d];
        for k in 0..d {
            let inv = 1.0 / self.lengthscales[k];
            for i in 0..m.nrows() {
                out[i * d + k] = m[(i, k)] * inv;
            }
        }
        out
    }

    /// Gram matrix `[k(a_i, b_j)]`.
    pub fn matrix(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(a.ncols())?;
        self.check_dim(b.ncols())?;
        Ok(self.matrix_unchecked(a, b))
    }

    pub(crate) fn matrix_unchecked(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.dim();
        let ua = self.scaled_rows(a);
        let ub = self.scaled_rows(b);
        let (n, m) = (a.nrows(), b.nrows());
        DMatrix::from_fn(n, m, |i, j| {
            let s = sq_dist(&ua[i * d..(i + 1) * d], &ub[j * d..(j + 1) * d]);
            self.profile(s).0
        })
    }

    /// Symmetric Gram matrix of `a` with itself.
    pub fn gram(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(a.ncols())?;
        let d = self.dim();
        let ua = self.scaled_rows(a);
        let n = a.nrows();
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            out[(j, j)] = self.amplitude2;
            for i in (j + 1)..n {
                let s = sq_dist(&ua[i * d..(i + 1) * d], &ua[j * d..(j + 1) * d]);
                let k = self.profile(s).0;
                out[(i, j)] = k;
                out[(j, i)] = k;
            }
        }
        Ok(out)
    }

    /// Accumulates `Σ_ij W_ij ∂K(a,b)_ij/∂θ` into `out` (length `n_params`).
    pub fn contract_grad(&self, a: &DMatrix<f64>, b: &DMatrix<f64>, weights: &DMatrix<f64>, out: &mut [f64]) {
        let d = self.dim();
        debug_assert_eq!(out.len(), d + 1);
        debug_assert_eq!(weights.shape(), (a.nrows(), b.nrows()));
        let ua = self.scaled_rows(a);
        let ub = self.scaled_rows(b);
        let mut acc = vec![0.0; d + 1];
        for j in 0..b.nrows() {
            let vb = &ub[j * d..(j + 1) * d];
            for i in 0..a.nrows() {
                let w = weights[(i, j)];
                if w == 0.0 {
                    continue;
                }
                let va = &ua[i * d..(i + 1) * d];
                let s = sq_dist(va, vb);
                let (k, rho) = self.profile(s);
                let wr = w * rho;
                for k_ in 0..d {
                    let diff = va[k_] - vb[k_];
                    acc[k_] += wr * diff * diff;
                }
                acc[d] += w * k;
            }
        }
        for (o, a) in out.iter_mut().zip(acc) {
            *o += a;
        }
    }

    /// Value and gradient of `k(x, z)` with respect to `x`.
    pub fn eval_grad_x(&self, x: &[f64], z: &[f64], grad: &mut [f64]) -> f64 {
        let s = self.scaled_sq_dist(x, z);
        let (k, rho) = self.profile(s);
        for ((g, (a, b)), l) in grad.iter_mut().zip(x.iter().zip(z)).zip(&self.lengthscales) {
            *g = -rho * (a - b) / (l * l);
        }
        k
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}
