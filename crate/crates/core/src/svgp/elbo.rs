use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use super::{Likelihood, SvgpState, KZ_JITTER};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::factorize;
use crate::stats::{inv_mills, log_norm_cdf, GaussHermite};

pub(crate) fn hermite() -> &'static GaussHermite {
    static GH: OnceLock<GaussHermite> = OnceLock::new();
    GH.get_or_init(|| GaussHermite::new(20))
}

/// ELBO gradient. `r` is the gradient with respect to the lower-triangular
/// entries of the covariance factor (upper triangle zero); `kernel` follows
/// [`crate::KernelParams::log_params`].
#[derive(Clone, Debug)]
pub struct ElboGrad {
    pub elbo: f64,
    pub m: DVector<f64>,
    pub r: DMatrix<f64>,
    pub kernel: Vec<f64>,
    pub log_noise: Option<f64>,
}

/// `(N/Ñ)·Σ E_q[log p(y|f)] − KL(q(u)‖p(u))` for a batch of `Ñ` observations.
pub fn elbo(state: &SvgpState, batch: &Dataset, total_n: usize) -> Result<f64> {
    evaluate(state, batch, total_n, false).map(|g| g.elbo)
}

pub fn elbo_grad(state: &SvgpState, batch: &Dataset, total_n: usize) -> Result<ElboGrad> {
    evaluate(state, batch, total_n, true)
}

/// Expected log-likelihood of one observation with its derivatives in the
/// predictive mean and variance (and log-noise for the Gaussian case).
fn expected_loglik(lik: Likelihood, y: f64, mu: f64, var: f64) -> (f64, f64, f64, f64) {
    match lik {
        Likelihood::Gaussian { noise } => {
            let r = y - mu;
            let q = r * r + var;
            let ell = -0.5 * (2.0 * std::f64::consts::PI * noise).ln() - q / (2.0 * noise);
            (ell, r / noise, -0.5 / noise, -0.5 + q / (2.0 * noise))
        }
        Likelihood::BernoulliProbit => {
            let s = if y > 0.5 { 1.0 } else { -1.0 };
            let gh = hermite();
            let sq = (2.0 * var.max(0.0)).sqrt();
            let norm = std::f64::consts::PI.sqrt();
            let (mut ell, mut dmu, mut dsq) = (0.0, 0.0, 0.0);
            for (t, w) in gh.nodes.iter().zip(&gh.weights) {
                let f = mu + sq * t;
                let lam = inv_mills(s * f);
                ell += w * log_norm_cdf(s * f);
                dmu += w * s * lam;
                dsq += w * s * lam * t;
            }
            let dvar = if sq > 1e-12 {
                dsq / norm / sq
            } else {
                // Price's theorem at zero variance: ½ d²/dμ² log Φ(sμ).
                let x = s * mu;
                let lam = inv_mills(x);
                -0.5 * lam * (x + lam)
            };
            (ell / norm, dmu / norm, dvar, 0.0)
        }
    }
}

fn evaluate(state: &SvgpState, batch: &Dataset, total_n: usize, want_grad: bool) -> Result<ElboGrad> {
    if batch.is_empty() {
        return Err(Error::EmptyData);
    }
    if batch.dim() != state.kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.kernel.dim(),
            got: batch.dim(),
        });
    }
    if state.likelihood == Likelihood::BernoulliProbit && batch.y.iter().any(|v| *v != 0.0 && *v != 1.0) {
        return Err(Error::LikelihoodMismatch);
    }
    let kernel = &state.kernel;
    let z = state.z();
    let mm = z.nrows();
    let b = batch.len();
    let c = total_n.max(b) as f64 / b as f64;

    let kz = kernel.gram(z)?;
    let factor = factorize(&kz, KZ_JITTER)?;
    let li = factor.lower_inverse();
    let r_u = state.s_factor();
    let (m_w, r_w) = if state.is_whitened() {
        (state.m.clone(), r_u.clone())
    } else {
        (&li * &state.m, &li * r_u)
    };

    let kzx = kernel.matrix_unchecked(z, &batch.x);
    let a = &li * &kzx;
    let mu = a.tr_mul(&m_w);
    // T = (S_w − I)A gives the variances and, reused, the adjoint of A.
    let mut s_minus = &r_w * r_w.transpose();
    for i in 0..mm {
        s_minus[(i, i)] -= 1.0;
    }
    let t = &s_minus * &a;
    let a2 = kernel.amplitude2();

    let mut ell = 0.0;
    let mut g_mu = DVector::zeros(b);
    let mut g_v = DVector::zeros(b);
    let mut g_noise = 0.0;
    for i in 0..b {
        let var = a2 + a.column(i).dot(&t.column(i));
        let y = state.transform.forward(batch.y[i]);
        let (e, dm, dv, dn) = expected_loglik(state.likelihood, y, mu[i], var.max(0.0));
        ell += e;
        g_mu[i] = c * dm;
        g_v[i] = c * dv;
        g_noise += c * dn;
    }

    let log_diag: f64 = (0..mm).map(|i| r_u[(i, i)].ln()).sum();
    let mut kl = 0.5 * (r_w.norm_squared() + m_w.norm_squared() - mm as f64) - log_diag;
    if !state.is_whitened() {
        kl += 0.5 * factor.logdet();
    }
    let value = c * ell - kl;
    if !value.is_finite() {
        return Err(Error::NonFinite("elbo"));
    }
    if !want_grad {
        return Ok(ElboGrad {
            elbo: value,
            m: DVector::zeros(0),
            r: DMatrix::zeros(0, 0),
            kernel: Vec::new(),
            log_noise: None,
        });
    }

    // Reverse pass.
    let m_bar_w = &a * &g_mu - &m_w;
    let mut ag = a.clone();
    for i in 0..b {
        ag.column_mut(i).scale_mut(g_v[i]);
    }
    let a_t = a.transpose();
    let r_bar_w = (&ag * &a_t) * &r_w * 2.0 - &r_w;
    let mut a_bar = t;
    for i in 0..b {
        a_bar.column_mut(i).scale_mut(2.0 * g_v[i]);
    }
    a_bar += &m_w * g_mu.transpose();
    let kzx_bar = li.transpose() * &a_bar;
    let mut l_bar = -(&kzx_bar * &a_t);

    let (m_bar, mut r_bar) = if state.is_whitened() {
        (m_bar_w, r_bar_w)
    } else {
        l_bar -= li.tr_mul(&m_bar_w) * m_w.transpose() + li.tr_mul(&r_bar_w) * r_w.transpose();
        (li.tr_mul(&m_bar_w), li.tr_mul(&r_bar_w))
    };
    for j in 0..mm {
        r_bar[(j, j)] += 1.0 / r_u[(j, j)];
        for i in 0..j {
            r_bar[(i, j)] = 0.0;
            l_bar[(i, j)] = 0.0;
        }
    }

    // Cholesky adjoint: K̄ = ½ L⁻ᵀ (P + Pᵀ) L⁻¹ with P = Φ(Lᵀ L̄).
    let mut p = factor.l().tr_mul(&l_bar);
    for j in 0..mm {
        p[(j, j)] *= 0.5;
        for i in 0..j {
            p[(i, j)] = 0.0;
        }
    }
    let sym = &p + p.transpose();
    let mut kz_bar = li.tr_mul(&sym) * &li * 0.5;
    if !state.is_whitened() {
        kz_bar -= factor.inverse() * 0.5;
    }

    let np = kernel.n_params();
    let mut kg = vec![0.0; np];
    kernel.contract_grad(z, &batch.x, &kzx_bar, &mut kg);
    kernel.contract_grad(z, z, &kz_bar, &mut kg);
    kg[np - 1] += a2 * g_v.sum();

    let log_noise = match state.likelihood {
        Likelihood::Gaussian { .. } => Some(g_noise),
        Likelihood::BernoulliProbit => None,
    };
    let out = ElboGrad {
        elbo: value,
        m: m_bar,
        r: r_bar,
        kernel: kg,
        log_noise,
    };
    if out.m.iter().chain(out.r.iter()).chain(&out.kernel).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("elbo gradient"));
    }
    Ok(out)
}
