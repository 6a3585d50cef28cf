use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{elbo_grad, ElboGrad, Likelihood, SvgpState};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gp::exact::{LOG_AMP_MAX, LOG_AMP_MIN, LOG_LS_MAX, LOG_LS_MIN, LOG_NOISE_MAX, LOG_NOISE_MIN};
use crate::optim::Adam;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSchedule {
    pub learning_rate: f64,
    /// Epochs without improvement before stopping.
    pub patience: usize,
    /// Epochs without improvement before halving the learning rate.
    pub lr_patience: usize,
    pub max_epochs: usize,
    /// `None`: full batch up to 2048 points, 1024-point minibatches beyond.
    pub batch_size: Option<usize>,
    /// An epoch counts as an improvement when it beats the best ELBO by
    /// more than `min_delta_rel · max(|best|, 1)`.
    pub min_delta_rel: f64,
    pub learn_hyperparameters: bool,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            patience: 50,
            lr_patience: 10,
            max_epochs: 2000,
            batch_size: None,
            min_delta_rel: 1e-4,
            learn_hyperparameters: true,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.patience == 0 || self.lr_patience == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidParameter(
                "schedule needs a positive learning rate, patiences and epoch budget".into(),
            ));
        }
        Ok(())
    }

    fn batch_for(&self, n: usize) -> usize {
        match self.batch_size {
            Some(b) => b.clamp(1, n),
            None if n <= 2048 => n,
            None => 1024,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub initial_elbo: f64,
    pub best_elbo: f64,
    pub epochs: usize,
    /// Training hit a non-finite value and returned the best state seen.
    pub aborted: bool,
}

const LOG_R_MIN: f64 = -18.0;
const LOG_R_MAX: f64 = 5.0;

/// Flat parameter vector: `m`, the lower triangle of `R` column by column
/// (diagonal in log space), kernel log-parameters and, for Gaussian
/// likelihoods, the log noise.
fn pack(state: &SvgpState, hypers: bool) -> Vec<f64> {
    let mm = state.n_inducing();
    let mut p: Vec<f64> = state.m.iter().copied().collect();
    let r = state.s_factor();
    for j in 0..mm {
        p.push(r[(j, j)].ln());
        for i in (j + 1)..mm {
            p.push(r[(i, j)]);
        }
    }
    if hypers {
        p.extend(state.kernel.log_params());
        if let Some(n) = state.noise() {
            p.push(n.ln());
        }
    }
    p
}

fn unpack(template: &SvgpState, p: &[f64], hypers: bool) -> SvgpState {
    let mm = template.n_inducing();
    let mut s = template.clone();
    s.m = DVector::from_column_slice(&p[..mm]);
    let mut r = DMatrix::zeros(mm, mm);
    let mut k = mm;
    for j in 0..mm {
        r[(j, j)] = p[k].exp();
        k += 1;
        for i in (j + 1)..mm {
            r[(i, j)] = p[k];
            k += 1;
        }
    }
    s.s_factor = r;
    if hypers {
        let np = s.kernel.n_params();
        s.kernel = s.kernel.with_log_params(&p[k..k + np]);
        k += np;
        if let Likelihood::Gaussian { .. } = s.likelihood {
            s.likelihood = Likelihood::Gaussian { noise: p[k].exp() };
        }
    }
    s
}

fn pack_grad(state: &SvgpState, g: &ElboGrad, hypers: bool) -> Vec<f64> {
    let mm = state.n_inducing();
    let mut out: Vec<f64> = g.m.iter().copied().collect();
    let r = state.s_factor();
    for j in 0..mm {
        out.push(g.r[(j, j)] * r[(j, j)]);
        for i in (j + 1)..mm {
            out.push(g.r[(i, j)]);
        }
    }
    if hypers {
        out.extend(&g.kernel);
        if let Some(n) = g.log_noise {
            out.push(n);
        }
    }
    out
}

fn clamp(p: &mut [f64], mm: usize, dim: usize, hypers: bool, gaussian: bool) {
    let mut k = mm;
    for j in 0..mm {
        p[k] = p[k].clamp(LOG_R_MIN, LOG_R_MAX);
        k += mm - j;
    }
    if hypers {
        for v in &mut p[k..k + dim] {
            *v = v.clamp(LOG_LS_MIN, LOG_LS_MAX);
        }
        p[k + dim] = p[k + dim].clamp(LOG_AMP_MIN, LOG_AMP_MAX);
        if gaussian {
            p[k + dim + 1] = p[k + dim + 1].clamp(LOG_NOISE_MIN, LOG_NOISE_MAX);
        }
    }
}

/// Adam on the ELBO with learning-rate halving and early stopping; returns
/// the best state seen. `Z` is never touched.
pub fn train<R: Rng + ?Sized>(
    state: &SvgpState,
    data: &Dataset,
    schedule: &TrainSchedule,
    rng: &mut R,
) -> Result<(SvgpState, TrainReport)> {
    schedule.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let n = data.len();
    let hypers = schedule.learn_hyperparameters;
    let gaussian = matches!(state.likelihood, Likelihood::Gaussian { .. });
    let mm = state.n_inducing();
    let dim = state.kernel.dim();
    let batch = schedule.batch_for(n);

    let mut p = pack(state, hypers);
    let mut adam = Adam::new(p.len(), schedule.learning_rate);
    let initial = super::elbo(state, data, n)?;
    let mut best = (initial, state.clone());
    let mut wait = 0;
    let mut lr_wait = 0;
    let mut aborted = false;
    let mut epochs = 0;
    let mut order: Vec<usize> = (0..n).collect();

    'outer: for _ in 0..schedule.max_epochs {
        epochs += 1;
        let current = unpack(state, &p, hypers);
        let epoch_elbo;
        if batch == n {
            let g = match elbo_grad(&current, data, n) {
                Ok(g) => g,
                Err(e) => {
                    log::warn!("training aborted: {e}");
                    aborted = true;
                    break;
                }
            };
            epoch_elbo = g.elbo;
            if epoch_elbo > best.0 + schedule.min_delta_rel * best.0.abs().max(1.0) {
                best = (epoch_elbo, current.clone());
                wait = 0;
                lr_wait = 0;
            } else {
                wait += 1;
                lr_wait += 1;
            }
            let grad = pack_grad(&current, &g, hypers);
            adam.ascend(&mut p, &grad);
        } else {
            order.shuffle(rng);
            let mut acc = 0.0;
            let mut steps = 0;
            for chunk in order.chunks(batch) {
                let cur = unpack(state, &p, hypers);
                let g = match elbo_grad(&cur, &data.select(chunk), n) {
                    Ok(g) => g,
                    Err(e) => {
                        log::warn!("training aborted: {e}");
                        aborted = true;
                        break 'outer;
                    }
                };
                acc += g.elbo;
                steps += 1;
                let grad = pack_grad(&cur, &g, hypers);
                adam.ascend(&mut p, &grad);
                clamp(&mut p, mm, dim, hypers, gaussian);
            }
            epoch_elbo = acc / steps as f64;
            if epoch_elbo > best.0 + schedule.min_delta_rel * best.0.abs().max(1.0) {
                best = (epoch_elbo, unpack(state, &p, hypers));
                wait = 0;
                lr_wait = 0;
            } else {
                wait += 1;
                lr_wait += 1;
            }
        }
        clamp(&mut p, mm, dim, hypers, gaussian);
        if wait >= schedule.patience {
            break;
        }
        if lr_wait >= schedule.lr_patience {
            adam.lr *= 0.5;
            lr_wait = 0;
        }
    }
    Ok((
        best.1,
        TrainReport {
            initial_elbo: initial,
            best_elbo: best.0,
            epochs,
            aborted,
        },
    ))
}
