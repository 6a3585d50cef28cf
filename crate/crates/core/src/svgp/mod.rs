//! Sparse variational GP with fixed inducing inputs.

mod elbo;
mod train;

pub use elbo::{elbo, elbo_grad, ElboGrad};
pub use train::{train, TrainReport, TrainSchedule};
pub(crate) use elbo::hermite as hermite_rule;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gp::{KernelParams, OutputTransform};
use crate::numerics::factorize;
use crate::stats::norm_cdf;

/// Jitter added to `K_Z` before every factorisation.
pub const KZ_JITTER: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Likelihood {
    Gaussian { noise: f64 },
    BernoulliProbit,
}

/// `q(u) = N(m, S)` with `S = R Rᵀ`. When `whitened`, `(m, S)` describe
/// `v = L⁻¹u` with `K_Z = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct SvgpState {
    z: DMatrix<f64>,
    pub m: DVector<f64>,
    s_factor: DMatrix<f64>,
    pub kernel: KernelParams,
    pub likelihood: Likelihood,
    whitened: bool,
    pub transform: OutputTransform,
}

/// Quantities shared by prediction and the ELBO: `L⁻¹` and the whitened
/// variational parameters.
pub(crate) struct Whitened {
    pub l_inv: DMatrix<f64>,
    pub m: DVector<f64>,
    pub r: DMatrix<f64>,
}

impl SvgpState {
    /// Prior-initialised state: `q(u) = p(u)`.
    pub fn new(z: DMatrix<f64>, kernel: KernelParams, likelihood: Likelihood, whitened: bool) -> Result<Self> {
        let m_count = z.nrows();
        if m_count == 0 {
            return Err(Error::EmptyCandidates);
        }
        if z.ncols() != kernel.dim() {
            return Err(Error::DimensionMismatch {
                expected: kernel.dim(),
                got: z.ncols(),
            });
        }
        for i in 0..m_count {
            for j in 0..i {
                let d2: f64 = (0..z.ncols()).map(|k| (z[(i, k)] - z[(j, k)]).powi(2)).sum();
                if d2.sqrt() <= 1e-12 {
                    return Err(Error::InvalidParameter(format!("inducing inputs {j} and {i} coincide")));
                }
            }
        }
        if let Likelihood::Gaussian { noise } = likelihood {
            if !(noise > 0.0 && noise.is_finite()) {
                return Err(Error::InvalidParameter("noise variance must be positive".into()));
            }
        }
        let s_factor = if whitened {
            DMatrix::identity(m_count, m_count)
        } else {
            factorize(&kernel.gram(&z)?, KZ_JITTER)?.l().clone()
        };
        Ok(Self {
            z,
            m: DVector::zeros(m_count),
            s_factor,
            kernel,
            likelihood,
            whitened,
            transform: OutputTransform::default(),
        })
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn n_inducing(&self) -> usize {
        self.z.nrows()
    }

    pub fn is_whitened(&self) -> bool {
        self.whitened
    }

    pub fn s_factor(&self) -> &DMatrix<f64> {
        &self.s_factor
    }

    /// Replaces the covariance factor; the upper triangle is zeroed and the
    /// diagonal must be positive.
    pub fn set_s_factor(&mut self, r: DMatrix<f64>) -> Result<()> {
        let n = self.n_inducing();
        if r.shape() != (n, n) {
            return Err(Error::DimensionMismatch { expected: n, got: r.nrows() });
        }
        let mut r = r;
        for j in 0..n {
            if !(r[(j, j)] > 0.0) {
                return Err(Error::InvalidParameter("covariance factor needs a positive diagonal".into()));
            }
            for i in 0..j {
                r[(i, j)] = 0.0;
            }
        }
        self.s_factor = r;
        Ok(())
    }

    pub fn s(&self) -> DMatrix<f64> {
        &self.s_factor * self.s_factor.transpose()
    }

    pub fn noise(&self) -> Option<f64> {
        match self.likelihood {
            Likelihood::Gaussian { noise } => Some(noise),
            Likelihood::BernoulliProbit => None,
        }
    }

    pub(crate) fn whitened_view(&self) -> Result<Whitened> {
        let kz = self.kernel.gram(&self.z)?;
        let factor = factorize(&kz, KZ_JITTER)?;
        let l_inv = factor.lower_inverse();
        let (m, r) = if self.whitened {
            (self.m.clone(), self.s_factor.clone())
        } else {
            (&l_inv * &self.m, &l_inv * &self.s_factor)
        };
        Ok(Whitened { l_inv, m, r })
    }

    /// Latent mean and variance in model units.
    pub fn latent_predict(&self, xs: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        if xs.ncols() != self.kernel.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.kernel.dim(),
                got: xs.ncols(),
            });
        }
        let w = self.whitened_view()?;
        Ok(latent_from_view(&self.kernel, &self.z, &w, xs))
    }

    /// Latent mean and variance in observation units.
    pub fn predict(&self, xs: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let (m, v) = self.latent_predict(xs)?;
        let t = self.transform;
        Ok((m.map(|v| t.inverse(v)), v * (t.scale * t.scale)))
    }

    /// `Φ(μ/√(1+σ²))`.
    pub fn predict_class_probability(&self, xs: &DMatrix<f64>) -> Result<DVector<f64>> {
        if self.likelihood != Likelihood::BernoulliProbit {
            return Err(Error::LikelihoodMismatch);
        }
        let (m, v) = self.latent_predict(xs)?;
        Ok(DVector::from_fn(m.len(), |i, _| norm_cdf(m[i] / (1.0 + v[i]).sqrt())))
    }

    /// Closed-form optimal `q(u)` for a Gaussian likelihood, fixed `Z` and hyperparameters.
    pub fn set_optimal_variational(&mut self, data: &Dataset) -> Result<()> {
        let Likelihood::Gaussian { noise } = self.likelihood else {
            return Err(Error::LikelihoodMismatch);
        };
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        let kz = self.kernel.gram(&self.z)?;
        let factor = factorize(&kz, KZ_JITTER)?;
        let l_inv = factor.lower_inverse();
        let kzx = self.kernel.matrix(&self.z, &data.x)?;
        let a = &l_inv * kzx;
        let y = data.y.map(|v| self.transform.forward(v));
        let mut lambda = &a * a.transpose() / noise;
        for i in 0..lambda.nrows() {
            lambda[(i, i)] += 1.0;
        }
        let lf = factorize(&lambda, 0.0)?;
        let m_w = lf.solve_vec(&(&a * y / noise))?;
        // S = Λ⁻¹ = (Lᵀ_Λ)⁻¹ L_Λ⁻¹, so R = L_Λ⁻ᵀ up to an orthogonal factor; take
        // its Cholesky to keep R lower triangular.
        let s_w = lf.inverse();
        let r_w = factorize(&s_w, 0.0)?.l().clone();
        if self.whitened {
            self.m = m_w;
            self.s_factor = r_w;
        } else {
            let l = factor.l();
            self.m = l * m_w;
            self.s_factor = factorize(&(l * &s_w * l.transpose()), 0.0)?.l().clone();
        }
        Ok(())
    }

    /// Rebuilds the state on new inducing inputs, projecting the current
    /// posterior `q(f_Z')` as the new `q(u')`.
    pub fn reinduce(&self, z: DMatrix<f64>, kernel: KernelParams) -> Result<SvgpState> {
        let mut next = SvgpState::new(z, kernel, self.likelihood, self.whitened)?;
        next.transform = self.transform;
        let w = self.whitened_view()?;
        let kzz_new = self.kernel.matrix(&self.z, next.z())?;
        let a = &w.l_inv * kzz_new;
        let mean = a.tr_mul(&w.m);
        let ra = w.r.tr_mul(&a);
        let mut cov = next.kernel.gram(next.z())? - a.tr_mul(&a) + ra.tr_mul(&ra);
        cov = (&cov + cov.transpose()) * 0.5;
        let new_factor = factorize(&next.kernel.gram(next.z())?, KZ_JITTER)?;
        if next.whitened {
            let li = new_factor.lower_inverse();
            next.m = &li * mean;
            let s = &li * cov * li.transpose();
            next.s_factor = factorize(&s, 1e-6)?.l().clone();
        } else {
            next.m = mean;
            next.s_factor = factorize(&cov, 1e-6)?.l().clone();
        }
        Ok(next)
    }
}

pub(crate) fn latent_from_view(
    kernel: &KernelParams,
    z: &DMatrix<f64>,
    w: &Whitened,
    xs: &DMatrix<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let kzx = kernel.matrix_unchecked(z, xs);
    let a = &w.l_inv * kzx;
    let mean = a.tr_mul(&w.m);
    let ra = w.r.transpose() * &a;
    let a2 = kernel.amplitude2();
    let var = DVector::from_fn(xs.nrows(), |j, _| {
        (a2 - a.column(j).norm_squared() + ra.column(j).norm_squared()).max(0.0)
    });
    (mean, var)
}
