//! Inducing point allocation: quality-weighted DPP MAP selection and the
//! regression baselines it is compared against.

pub mod diagnostics;
mod kmeans;
pub mod quality;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;

pub use diagnostics::{region_kl_diagnostic, spectral_floor, weighted_trace};
pub use kmeans::kmeans_centroids;
pub use quality::{q_lin, Baseline, Relaxation};

use crate::acq;
use crate::data::{Bounds, Dataset};
use crate::error::{Error, Result};
use crate::gp::KernelParams;
use crate::numerics::greedy_select_with_residuals;
use crate::svgp::SvgpState;

/// Qualities below this are raised to it before selection.
pub const QUALITY_FLOOR: f64 = 1e-12;
/// Thompson-sample maxima used to represent `f*` for the entropy quality.
pub const ENT_MAX_SAMPLES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QualitySpec {
    /// `q ≡ 1`: conditional variance reduction.
    Constant,
    Lin,
    Imp { baseline: Baseline, relaxation: Relaxation },
    Al,
    Hv,
    Ent { alpha: f64 },
}

impl QualitySpec {
    pub fn needs_model(&self) -> bool {
        !matches!(self, QualitySpec::Constant | QualitySpec::Lin)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IpaVariant {
    UniformSpace,
    RandomSubset,
    KMeans,
    QualityDpp(QualitySpec),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IpaStrategy {
    pub variant: IpaVariant,
    pub m: usize,
}

impl IpaStrategy {
    pub fn new(variant: IpaVariant, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("inducing count must be at least 1".into()));
        }
        if let IpaVariant::QualityDpp(QualitySpec::Ent { alpha }) = variant {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::InvalidParameter("ent alpha must lie strictly inside (0, 1)".into()));
            }
        }
        Ok(Self { variant, m })
    }
}

impl FromStr for IpaVariant {
    type Err = Error;

    /// Accepts `cvr`, `lin`, `imp[:mean|:max][:softplus]`, `al`, `hv`,
    /// `ent[:alpha]`, `kmeans`, `random`, `uniform`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let mut parts = s.split(':');
        let head = parts.next().unwrap_or_default();
        let rest: Vec<&str> = parts.collect();
        let bad = || Error::InvalidParameter(format!("unknown IPA strategy '{s}'"));
        let variant = match head {
            "cvr" | "constant" => IpaVariant::QualityDpp(QualitySpec::Constant),
            "lin" => IpaVariant::QualityDpp(QualitySpec::Lin),
            "imp" => {
                let mut baseline = Baseline::MinMean;
                let mut relaxation = Relaxation::Relu;
                for r in &rest {
                    match *r {
                        "min" => baseline = Baseline::MinMean,
                        "mean" => baseline = Baseline::MeanMean,
                        "max" => baseline = Baseline::MaxMean,
                        "relu" => relaxation = Relaxation::Relu,
                        "softplus" => relaxation = Relaxation::Softplus,
                        _ => return Err(bad()),
                    }
                }
                return Ok(IpaVariant::QualityDpp(QualitySpec::Imp { baseline, relaxation }));
            }
            "al" => IpaVariant::QualityDpp(QualitySpec::Al),
            "hv" => IpaVariant::QualityDpp(QualitySpec::Hv),
            "ent" => {
                let alpha = match rest.as_slice() {
                    [] => 0.5,
                    [a] => a.parse().map_err(|_| bad())?,
                    _ => return Err(bad()),
                };
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::InvalidParameter("ent alpha must lie strictly inside (0, 1)".into()));
                }
                return Ok(IpaVariant::QualityDpp(QualitySpec::Ent { alpha }));
            }
            "kmeans" | "k-means" => IpaVariant::KMeans,
            "random" | "random-subset" => IpaVariant::RandomSubset,
            "uniform" | "uniform-space" => IpaVariant::UniformSpace,
            _ => return Err(bad()),
        };
        if !rest.is_empty() {
            return Err(bad());
        }
        Ok(variant)
    }
}

impl fmt::Display for IpaVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IpaVariant::UniformSpace => write!(f, "uniform"),
            IpaVariant::RandomSubset => write!(f, "random"),
            IpaVariant::KMeans => write!(f, "kmeans"),
            IpaVariant::QualityDpp(q) => match q {
                QualitySpec::Constant => write!(f, "cvr"),
                QualitySpec::Lin => write!(f, "lin"),
                QualitySpec::Imp { baseline, relaxation } => {
                    write!(f, "imp")?;
                    match baseline {
                        Baseline::MinMean => {}
                        Baseline::MeanMean => write!(f, ":mean")?,
                        Baseline::MaxMean => write!(f, ":max")?,
                    }
                    if *relaxation == Relaxation::Softplus {
                        write!(f, ":softplus")?;
                    }
                    Ok(())
                }
                QualitySpec::Al => write!(f, "al"),
                QualitySpec::Hv => write!(f, "hv"),
                QualitySpec::Ent { alpha } => write!(f, "ent:{alpha}"),
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct Allocation {
    pub z: DMatrix<f64>,
    /// Rows of the candidate set that were chosen, in selection order.
    pub indices: Option<Vec<usize>>,
    /// Quality values used for selection (quality-DPP only).
    pub quality: Option<Vec<f64>>,
    /// `tr(K_X − Q_X(Z))` over the candidate set.
    pub trace: f64,
    /// `Σ q² (K_X − Q_X(Z))_ii` (equals `trace` for unit quality).
    pub weighted_trace: f64,
    pub seconds: f64,
}

/// Quality values of every row of `data.x` under `spec`.
pub fn evaluate_quality<R: Rng + ?Sized>(
    spec: &QualitySpec,
    data: &Dataset,
    models: &[&SvgpState],
    m: usize,
    bounds: &Bounds,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let x = &data.x;
    let first = || models.first().copied().ok_or(Error::MissingModel);
    let mut q = match spec {
        QualitySpec::Constant => vec![1.0; data.len()],
        QualitySpec::Lin => q_lin(data.y.as_slice())?,
        QualitySpec::Imp { baseline, relaxation } => quality::q_imp_vector(first()?, x, x, *baseline, *relaxation)?,
        QualitySpec::Al => quality::q_al_vector(first()?, x, x)?,
        QualitySpec::Hv => quality::q_hv_vector(models, x, x)?,
        QualitySpec::Ent { alpha } => {
            let model = first()?;
            let f_star = acq::max_value_samples(model, ENT_MAX_SAMPLES, bounds, rng)?;
            quality::q_ent_vector(model, x, *alpha, &f_star, m)?
        }
    };
    for v in &mut q {
        if !v.is_finite() {
            return Err(Error::NonFinite("quality"));
        }
        *v = v.max(QUALITY_FLOOR);
    }
    Ok(q)
}

/// Builds the inducing set for the next model from the current data and the
/// previous step's model(s). `kernel` is the previous kernel; its noise-free
/// form drives the conditional-variance recursion.
pub fn allocate<R: Rng + ?Sized>(
    strategy: &IpaStrategy,
    data: &Dataset,
    models: &[&SvgpState],
    kernel: &KernelParams,
    bounds: &Bounds,
    rng: &mut R,
) -> Result<Allocation> {
    let started = Instant::now();
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let n = data.len();
    let m = strategy.m;
    let unit = vec![1.0; n];
    let finish = |z: DMatrix<f64>, indices: Option<Vec<usize>>, quality: Option<Vec<f64>>| -> Result<Allocation> {
        let resid = diagnostics::nystrom_residual(&data.x, &z, kernel)?;
        let q = quality.as_deref().unwrap_or(&unit);
        Ok(Allocation {
            trace: resid.iter().sum(),
            weighted_trace: resid.iter().zip(q).map(|(r, q)| q * q * r).sum(),
            z,
            indices,
            quality,
            seconds: started.elapsed().as_secs_f64(),
        })
    };
    if n <= m {
        return finish(data.x.clone(), Some((0..n).collect()), None);
    }
    match strategy.variant {
        IpaVariant::UniformSpace => finish(bounds.sample_matrix(m, rng), None, None),
        IpaVariant::RandomSubset => {
            let idx = sample(rng, n, m).into_vec();
            finish(data.x.select_rows(&idx), Some(idx), None)
        }
        IpaVariant::KMeans => finish(kmeans_centroids(&data.x, m, rng), None, None),
        IpaVariant::QualityDpp(spec) => {
            let q = evaluate_quality(&spec, data, models, m, bounds, rng)?;
            let (idx, resid) = greedy_select_with_residuals(&data.x, kernel, &q, m)?;
            Ok(Allocation {
                z: data.x.select_rows(&idx),
                trace: resid.iter().sum(),
                weighted_trace: resid.iter().zip(&q).map(|(r, q)| q * q * r).sum(),
                indices: Some(idx),
                quality: Some(q),
                seconds: started.elapsed().as_secs_f64(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_names_roundtrip() {
        for s in ["cvr", "lin", "imp", "imp:mean", "imp:max:softplus", "al", "hv", "ent:0.25", "kmeans", "random", "uniform"] {
            let v: IpaVariant = s.parse().unwrap();
            assert_eq!(v.to_string(), s);
        }
        assert!("ent:1.5".parse::<IpaVariant>().is_err());
        assert!("dpp".parse::<IpaVariant>().is_err());
        assert!("cvr:x".parse::<IpaVariant>().is_err());
        assert!(IpaStrategy::new(IpaVariant::KMeans, 0).is_err());
    }
}
