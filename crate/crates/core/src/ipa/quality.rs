//! Quality functions. Scalar forms take the latent predictive `(μ, σ)` at a
//! point; the `*_vector` forms evaluate a model over a candidate matrix.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{norm_cdf, norm_pdf, GaussHermite};
use crate::svgp::SvgpState;

/// Reference value `f̂` used by the improvement quality.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    #[default]
    MinMean,
    MeanMean,
    MaxMean,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relaxation {
    #[default]
    Relu,
    Softplus,
}

/// `E[max(f − f̂, 0)]` for `f ~ N(μ, σ²)`.
pub fn expected_improvement_closed(mu: f64, sigma: f64, best: f64) -> f64 {
    let d = mu - best;
    if !(sigma > 0.0) {
        return d.max(0.0);
    }
    let g = d / sigma;
    (d * norm_cdf(g) + sigma * norm_pdf(g)).max(0.0)
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// `E[softplus(f − f̂)]` by 20-node Gauss–Hermite.
pub fn expected_softplus_improvement(mu: f64, sigma: f64, best: f64) -> f64 {
    let gh = crate::svgp::hermite_rule();
    expected_softplus_with(gh, mu, sigma, best)
}

fn expected_softplus_with(gh: &GaussHermite, mu: f64, sigma: f64, best: f64) -> f64 {
    gh.expect(mu - best, sigma * sigma, softplus)
}

/// Folded-normal mean `E|f|`.
pub fn folded_normal_mean(mu: f64, sigma: f64) -> f64 {
    if !(sigma > 0.0) {
        return mu.abs();
    }
    sigma * (2.0 / std::f64::consts::PI).sqrt() * (-mu * mu / (2.0 * sigma * sigma)).exp()
        + mu * (1.0 - 2.0 * norm_cdf(-mu / sigma))
}

/// Boundary proximity `max(f̂ − E|f|, 0)`.
pub fn al_quality(mu: f64, sigma: f64, f_hat: f64) -> f64 {
    (f_hat - folded_normal_mean(mu, sigma)).max(0.0)
}

/// Max-value entropy-search information gain averaged over `f*` samples.
pub fn mes_information_gain(mu: f64, sigma: f64, f_star: &[f64]) -> Result<f64> {
    if f_star.is_empty() {
        return Err(Error::EmptyMaxSamples);
    }
    let sigma = sigma.max(1e-12);
    let mut acc = 0.0;
    for fs in f_star {
        let g = (fs - mu) / sigma;
        let cdf = norm_cdf(g).max(1e-10);
        acc += g * norm_pdf(g) / (2.0 * cdf) - cdf.ln();
    }
    Ok((acc / f_star.len() as f64).max(0.0))
}

/// `exp((1/M)·(α/(1−α))·IG)`.
pub fn ent_quality(information_gain: f64, alpha: f64, m: usize) -> f64 {
    (information_gain * alpha / ((1.0 - alpha) * m as f64)).exp()
}

/// Latent predictive mean and standard deviation (observation units).
pub fn predictive(model: &SvgpState, x: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let (m, v) = model.predict(x)?;
    Ok((m, v.map(f64::sqrt)))
}

/// `f̂` for the improvement quality from the posterior mean at the queried inputs.
pub fn improvement_baseline(mean_at_queried: &[f64], mode: Baseline) -> f64 {
    match mode {
        Baseline::MinMean => mean_at_queried.iter().copied().fold(f64::INFINITY, f64::min),
        Baseline::MaxMean => mean_at_queried.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Baseline::MeanMean => mean_at_queried.iter().sum::<f64>() / mean_at_queried.len() as f64,
    }
}

/// Improvement quality at each row of `candidates`, with the baseline taken
/// over `queried`.
pub fn q_imp_vector(
    model: &SvgpState,
    queried: &DMatrix<f64>,
    candidates: &DMatrix<f64>,
    baseline: Baseline,
    relaxation: Relaxation,
) -> Result<Vec<f64>> {
    if queried.nrows() == 0 {
        return Err(Error::EmptyData);
    }
    let (mq, _) = model.predict(queried)?;
    let best = improvement_baseline(mq.as_slice(), baseline);
    let (mu, sd) = predictive(model, candidates)?;
    let scale = model.transform.scale;
    Ok((0..mu.len())
        .map(|i| match relaxation {
            Relaxation::Relu => expected_improvement_closed(mu[i], sd[i], best),
            // The relaxation is applied in standardised units so that the
            // resulting selection is invariant to affine rescaling of y.
            Relaxation::Softplus => {
                scale * expected_softplus_improvement(mu[i] / scale, sd[i] / scale, best / scale)
            }
        })
        .collect())
}

pub fn q_al_vector(model: &SvgpState, queried: &DMatrix<f64>, candidates: &DMatrix<f64>) -> Result<Vec<f64>> {
    if queried.nrows() == 0 {
        return Err(Error::EmptyData);
    }
    let (mq, _) = model.latent_predict(queried)?;
    let f_hat = mq.max().abs().max(mq.min().abs());
    let (mu, var) = model.latent_predict(candidates)?;
    Ok((0..mu.len()).map(|i| al_quality(mu[i], var[i].sqrt(), f_hat)).collect())
}

/// Product of per-objective improvements, each with its own min-mean baseline.
pub fn q_hv_vector(models: &[&SvgpState], queried: &DMatrix<f64>, candidates: &DMatrix<f64>) -> Result<Vec<f64>> {
    if models.is_empty() {
        return Err(Error::MissingModel);
    }
    let mut out = vec![1.0; candidates.nrows()];
    for model in models {
        let q = q_imp_vector(model, queried, candidates, Baseline::MinMean, Relaxation::Relu)?;
        for (o, v) in out.iter_mut().zip(q) {
            *o *= v;
        }
    }
    Ok(out)
}

pub fn q_ent_vector(model: &SvgpState, candidates: &DMatrix<f64>, alpha: f64, f_star: &[f64], m: usize) -> Result<Vec<f64>> {
    let (mu, sd) = predictive(model, candidates)?;
    (0..mu.len())
        .map(|i| mes_information_gain(mu[i], sd[i], f_star).map(|ig| ent_quality(ig, alpha, m)))
        .collect()
}

/// Shifted observations `y_i − min_j y_j`.
pub fn q_lin(y: &[f64]) -> Result<Vec<f64>> {
    if y.is_empty() {
        return Err(Error::EmptyData);
    }
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(y.iter().map(|v| v - lo).collect())
}
