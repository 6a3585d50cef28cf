use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::path::{PathPosterior, SamplePath};
use crate::data::{row_vec, Bounds};
use crate::error::{Error, Result};
use crate::gp::sample_rff_basis;
use crate::optim::{maximize_box, LbfgsOptions};

/// Points closer than this are treated as duplicates.
pub const DUPLICATE_TOL: f64 = 1e-9;
/// Full width of the uniform perturbation applied to duplicates.
pub const PERTURB_WIDTH: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchRequest {
    pub pool_size: usize,
    pub n_features: usize,
    /// L-BFGS iterations per path; 0 disables refinement.
    pub refine_iters: usize,
}

impl Default for BatchRequest {
    fn default() -> Self {
        Self {
            pool_size: 10_000,
            n_features: 100,
            refine_iters: 50,
        }
    }
}

fn lbfgs(request: &BatchRequest) -> LbfgsOptions {
    LbfgsOptions {
        max_iters: request.refine_iters,
        ..LbfgsOptions::default()
    }
}

fn argmax_column(vals: &DMatrix<f64>, col: usize) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..vals.nrows() {
        if vals[(i, col)] > best.1 {
            best = (i, vals[(i, col)]);
        }
    }
    best
}

/// Values of all `paths` (which must share a basis and anchors) on `pool`.
fn pool_values(paths: &[SamplePath], pool: &DMatrix<f64>) -> DMatrix<f64> {
    let p0 = &paths[0];
    let phi = p0.basis.feature_matrix(pool);
    let kp = p0.kernel.matrix_unchecked(pool, &p0.anchors);
    let w = DMatrix::from_fn(p0.w.len(), paths.len(), |i, j| paths[j].w[i]);
    let v = DMatrix::from_fn(p0.v.len(), paths.len(), |i, j| paths[j].v[i]);
    let mut f = phi * w + kp * v;
    let t = p0.transform;
    f.apply(|x| *x = t.inverse(*x));
    f
}

/// Pool search followed by projected L-BFGS from the best pool point, for
/// each path. The refined value is never below the seed value.
fn maximize_paths<R: Rng + ?Sized>(
    paths: &[SamplePath],
    bounds: &Bounds,
    request: &BatchRequest,
    rng: &mut R,
) -> Result<Vec<(Vec<f64>, f64)>> {
    let pool = bounds.sample_matrix(request.pool_size.max(1), rng);
    let vals = pool_values(paths, &pool);
    let mut out = Vec::with_capacity(paths.len());
    for (b, path) in paths.iter().enumerate() {
        let (i, seed_val) = argmax_column(&vals, b);
        if !seed_val.is_finite() {
            return Err(Error::NonFinite("sample path"));
        }
        let seed = row_vec(&pool, i);
        if request.refine_iters == 0 {
            out.push((seed, seed_val));
            continue;
        }
        let (x, v) = maximize_box(|x, g| path.eval_grad(x, g), &seed, &bounds.lower, &bounds.upper, lbfgs(request));
        if v.is_finite() && v >= seed_val {
            out.push((x, v));
        } else {
            out.push((seed, seed_val));
        }
    }
    Ok(out)
}

/// Maximises a single path over `bounds`.
pub fn maximize_path<R: Rng + ?Sized>(
    path: &SamplePath,
    bounds: &Bounds,
    request: &BatchRequest,
    rng: &mut R,
) -> Result<(Vec<f64>, f64)> {
    Ok(maximize_paths(std::slice::from_ref(path), bounds, request, rng)?.remove(0))
}

/// Nudges any row of `points` lying within [`DUPLICATE_TOL`] of an earlier
/// row, or of a row of `existing`, by uniform noise of width [`PERTURB_WIDTH`].
pub fn perturb_duplicates<R: Rng + ?Sized>(
    points: &mut DMatrix<f64>,
    existing: Option<&DMatrix<f64>>,
    bounds: &Bounds,
    rng: &mut R,
) {
    let d = points.ncols();
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() < DUPLICATE_TOL;
    for i in 0..points.nrows() {
        for _attempt in 0..8 {
            let p = row_vec(points, i);
            let clash = (0..i).any(|j| close(&p, &row_vec(points, j)))
                || existing.is_some_and(|e| (0..e.nrows()).any(|j| close(&p, &row_vec(e, j))));
            if !clash {
                break;
            }
            let mut q: Vec<f64> = p.iter().map(|v| v + PERTURB_WIDTH * (rng.random::<f64>() - 0.5)).collect();
            bounds.clip(&mut q);
            for k in 0..d {
                points[(i, k)] = q[k];
            }
        }
    }
}

/// `B` decoupled Thompson samples, each maximised over `bounds`. The batch
/// shares one feature basis and one candidate pool; every path has its own
/// prior weights and inducing draw. Random draws: basis, paths, pool.
pub fn thompson_batch<P: PathPosterior, R: Rng + ?Sized>(
    model: &P,
    b: usize,
    bounds: &Bounds,
    request: &BatchRequest,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let (x, _) = thompson_batch_with_values(model, b, bounds, request, rng)?;
    Ok(x)
}

pub fn thompson_batch_with_values<P: PathPosterior, R: Rng + ?Sized>(
    model: &P,
    b: usize,
    bounds: &Bounds,
    request: &BatchRequest,
    rng: &mut R,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if b == 0 {
        return Err(Error::InvalidParameter("batch size must be at least 1".into()));
    }
    let basis = sample_rff_basis(model.kernel(), request.n_features, rng);
    let paths = model.draw_paths(&basis, b, rng)?;
    let best = maximize_paths(&paths, bounds, request, rng)?;
    let d = bounds.dim();
    let mut x = DMatrix::zeros(b, d);
    for (i, (p, _)) in best.iter().enumerate() {
        for k in 0..d {
            x[(i, k)] = p[k];
        }
    }
    let values = best.iter().map(|(_, v)| *v).collect();
    perturb_duplicates(&mut x, None, bounds, rng);
    Ok((x, values))
}

/// Weights uniform on the simplex.
fn dirichlet_ones<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Chebyshev-scalarised Thompson sampling: each point maximises
/// `min_k λ_k (f_k(x) − r_k)` for fresh simplex weights `λ` and one path per
/// objective. `references[k]` is `r_k`. Random draws: bases and paths per
/// objective, pool, weights; with one objective this reproduces
/// [`thompson_batch`].
pub fn chebyshev_ts_batch<P: PathPosterior, R: Rng + ?Sized>(
    models: &[&P],
    references: &[f64],
    b: usize,
    bounds: &Bounds,
    request: &BatchRequest,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if models.is_empty() || references.len() != models.len() {
        return Err(Error::MissingModel);
    }
    if b == 0 {
        return Err(Error::InvalidParameter("batch size must be at least 1".into()));
    }
    let k = models.len();
    let mut paths: Vec<Vec<SamplePath>> = Vec::with_capacity(k);
    for model in models {
        let basis = sample_rff_basis(model.kernel(), request.n_features, rng);
        paths.push(model.draw_paths(&basis, b, rng)?);
    }
    let pool = bounds.sample_matrix(request.pool_size.max(1), rng);
    let lambdas: Vec<Vec<f64>> = (0..b).map(|_| dirichlet_ones(k, rng)).collect();
    let vals: Vec<DMatrix<f64>> = paths.iter().map(|p| pool_values(p, &pool)).collect();

    let d = bounds.dim();
    let mut out = DMatrix::zeros(b, d);
    for j in 0..b {
        let lam = &lambdas[j];
        let scal = |i: usize| (0..k).map(|o| lam[o] * (vals[o][(i, j)] - references[o])).fold(f64::INFINITY, f64::min);
        let (mut bi, mut bv) = (0, f64::NEG_INFINITY);
        for i in 0..pool.nrows() {
            let s = scal(i);
            if s > bv {
                bi = i;
                bv = s;
            }
        }
        if !bv.is_finite() {
            return Err(Error::NonFinite("scalarised sample path"));
        }
        let seed = row_vec(&pool, bi);
        let mut x = seed.clone();
        if request.refine_iters > 0 {
            let mut gk = vec![0.0; d];
            let objective = |x: &[f64], g: &mut [f64]| {
                let mut best = f64::INFINITY;
                for o in 0..k {
                    let v = lam[o] * (paths[o][j].eval_grad(x, &mut gk) - references[o]);
                    if v < best {
                        best = v;
                        for t in 0..d {
                            g[t] = lam[o] * gk[t];
                        }
                    }
                }
                best
            };
            let (xr, vr) = maximize_box(objective, &seed, &bounds.lower, &bounds.upper, lbfgs(request));
            if vr.is_finite() && vr >= bv {
                x = xr;
            }
        }
        for t in 0..d {
            out[(j, t)] = x[t];
        }
    }
    perturb_duplicates(&mut out, None, bounds, rng);
    Ok(out)
}
