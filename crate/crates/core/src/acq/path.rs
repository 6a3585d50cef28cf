use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::row_vec;
use crate::error::{Error, Result};
use crate::gp::{sample_rff_basis, ExactGp, KernelParams, OutputTransform, RffBasis};
use crate::numerics::factorize;
use crate::svgp::{SvgpState, KZ_JITTER};

/// An approximate posterior function draw
/// `f(x) = offset + scale·(φ(x)ᵀw + k(x, anchors)ᵀv)`.
#[derive(Clone, Debug)]
pub struct SamplePath {
    pub basis: RffBasis,
    pub w: DVector<f64>,
    pub v: DVector<f64>,
    pub anchors: DMatrix<f64>,
    pub kernel: KernelParams,
    pub transform: OutputTransform,
}

impl SamplePath {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; x.len()];
        self.eval_grad(x, &mut g)
    }

    pub fn eval_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut f = self.basis.eval_grad(x, &self.w, grad);
        let mut gk = vec![0.0; x.len()];
        for j in 0..self.anchors.nrows() {
            let z = row_vec(&self.anchors, j);
            let k = self.kernel.eval_grad_x(x, &z, &mut gk);
            f += self.v[j] * k;
            for (g, d) in grad.iter_mut().zip(&gk) {
                *g += self.v[j] * d;
            }
        }
        let s = self.transform.scale;
        grad.iter_mut().for_each(|g| *g *= s);
        self.transform.inverse(f)
    }

    /// Values at every row of `x`.
    pub fn eval_matrix(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let f = self.basis.feature_matrix(x) * &self.w + self.kernel.matrix_unchecked(x, &self.anchors) * &self.v;
        f.map(|v| self.transform.inverse(v))
    }
}

/// Models that admit pathwise-updated posterior draws.
pub trait PathPosterior {
    fn kernel(&self) -> &KernelParams;

    /// `count` independent draws sharing `basis`. Per path the prior weights
    /// are drawn first, then the conditioning noise.
    fn draw_paths<R: Rng + ?Sized>(&self, basis: &RffBasis, count: usize, rng: &mut R) -> Result<Vec<SamplePath>>;
}

fn standard_normal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

impl PathPosterior for SvgpState {
    fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    /// `v = K_Z⁻¹(u − Φ(Z)w)` with `u ~ q(u)`.
    fn draw_paths<R: Rng + ?Sized>(&self, basis: &RffBasis, count: usize, rng: &mut R) -> Result<Vec<SamplePath>> {
        let z = self.z();
        let factor = factorize(&self.kernel.gram(z)?, KZ_JITTER)?;
        let phi_z = basis.feature_matrix(z);
        let mm = z.nrows();
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let w = standard_normal(basis.n_features(), rng);
            let eps = standard_normal(mm, rng);
            let mut u = &self.m + self.s_factor() * eps;
            if self.is_whitened() {
                u = factor.l() * u;
            }
            let v = factor.solve_vec(&(u - &phi_z * &w))?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("path coefficients"));
            }
            out.push(SamplePath {
                basis: basis.clone(),
                w,
                v,
                anchors: z.clone(),
                kernel: self.kernel.clone(),
                transform: self.transform,
            });
        }
        Ok(out)
    }
}

impl PathPosterior for ExactGp {
    fn kernel(&self) -> &KernelParams {
        ExactGp::kernel(self)
    }

    /// `v = (K + σ²I)⁻¹(y − Φ(X)w − ε)` with `ε ~ N(0, σ²I)`.
    fn draw_paths<R: Rng + ?Sized>(&self, basis: &RffBasis, count: usize, rng: &mut R) -> Result<Vec<SamplePath>> {
        let x = self.train_x();
        let n = x.nrows();
        let phi_x = basis.feature_matrix(x);
        let sd = self.noise().sqrt();
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let w = standard_normal(basis.n_features(), rng);
            let v = match self.factor() {
                Some(f) => {
                    let eps = standard_normal(n, rng) * sd;
                    f.solve_vec(&(self.train_y() - &phi_x * &w - eps))?
                }
                None => DVector::zeros(0),
            };
            out.push(SamplePath {
                basis: basis.clone(),
                w,
                v,
                anchors: x.clone(),
                kernel: ExactGp::kernel(self).clone(),
                transform: self.transform(),
            });
        }
        Ok(out)
    }
}

/// Draws a fresh basis with `n_features` features and one path.
pub fn draw_path<P: PathPosterior, R: Rng + ?Sized>(model: &P, n_features: usize, rng: &mut R) -> Result<SamplePath> {
    let basis = sample_rff_basis(model.kernel(), n_features, rng);
    Ok(model.draw_paths(&basis, 1, rng)?.remove(0))
}
