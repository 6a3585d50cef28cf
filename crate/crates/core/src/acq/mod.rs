//! Batch acquisition: decoupled Thompson sampling, Chebyshev-scalarised
//! Thompson sampling, and the expected-improvement and BALD scores.

pub mod path;
mod thompson;

use nalgebra::DMatrix;
use rand::Rng;

pub use path::{draw_path, PathPosterior, SamplePath};
pub use thompson::{
    chebyshev_ts_batch, maximize_path, perturb_duplicates, thompson_batch, thompson_batch_with_values, BatchRequest,
    DUPLICATE_TOL, PERTURB_WIDTH,
};

use crate::data::Bounds;
use crate::error::{Error, Result};
use crate::ipa::quality::expected_improvement_closed;
use crate::stats::norm_cdf;
use crate::svgp::{hermite_rule, Likelihood, SvgpState};

/// Maxima of `count` Thompson samples of `model` over `bounds`.
pub fn max_value_samples<R: Rng + ?Sized>(model: &SvgpState, count: usize, bounds: &Bounds, rng: &mut R) -> Result<Vec<f64>> {
    let (_, values) = thompson_batch_with_values(model, count, bounds, &BatchRequest::default(), rng)?;
    Ok(values)
}

/// Scalarisation reference: the smallest posterior mean over the inducing inputs.
pub fn min_mean_reference(model: &SvgpState) -> Result<f64> {
    let (m, _) = model.predict(model.z())?;
    Ok(m.min())
}

/// Closed-form expected improvement over `best` at each row of `x`.
pub fn expected_improvement(model: &SvgpState, x: &DMatrix<f64>, best: f64) -> Result<Vec<f64>> {
    let (m, v) = model.predict(x)?;
    Ok((0..m.len()).map(|i| expected_improvement_closed(m[i], v[i].sqrt(), best)).collect())
}

/// Entropy of `Bern(Φ(x))`, accurate in both tails.
fn probit_entropy(x: f64) -> f64 {
    let q = norm_cdf(-x.abs());
    if q <= 0.0 {
        return 0.0;
    }
    -q * q.ln() - (1.0 - q) * (-q).ln_1p()
}

/// `H[Φ(f)] ≈ ln2·exp(−f²/(2τ²))` with this `τ²`.
const ENTROPY_WIDTH2: f64 = std::f64::consts::PI * std::f64::consts::LN_2 / 2.0;

/// `E_f H[Bern(Φ(f))]` for `f ~ N(μ, σ²)`. The Gaussian envelope of the
/// entropy is folded into the weight so the 20-node rule only integrates a
/// smooth ratio; plain Gauss–Hermite degrades badly once `σ² ≫ 1`.
pub fn expected_probit_entropy(mu: f64, var: f64) -> f64 {
    let var = var.max(0.0);
    let t2 = ENTROPY_WIDTH2;
    let post_var = var * t2 / (var + t2);
    let post_mean = mu * t2 / (var + t2);
    let log_norm = -0.5 * (mu * mu / (var + t2) + (2.0 * std::f64::consts::PI * (var + t2)).ln());
    let log_env = 0.5 * (2.0 * std::f64::consts::PI * t2).ln();
    hermite_rule().expect(post_mean, post_var, |f| {
        let h = probit_entropy(f);
        if h <= 0.0 {
            0.0
        } else {
            (h.ln() + f * f / (2.0 * t2) + log_env + log_norm).exp()
        }
    })
}

/// `H[Bern(Φ(μ/√(1+σ²)))] − E_f H[Bern(Φ(f))]` for `f ~ N(μ, σ²)`.
pub fn bald_score(mu: f64, var: f64) -> f64 {
    let outer = probit_entropy(mu / (1.0 + var.max(0.0)).sqrt());
    (outer - expected_probit_entropy(mu, var)).clamp(0.0, std::f64::consts::LN_2)
}

/// BALD score at each row of `x` for a probit classifier.
pub fn bald(model: &SvgpState, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if model.likelihood != Likelihood::BernoulliProbit {
        return Err(Error::LikelihoodMismatch);
    }
    let (m, v) = model.latent_predict(x)?;
    Ok((0..m.len()).map(|i| bald_score(m[i], v[i])).collect())
}

/// Indices of the `k` largest scores, best first; ties keep the lower index.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}
