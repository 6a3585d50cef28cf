//! Shared fixtures for the criterion benchmarks.

use ipalloc::{Bounds, Dataset, KernelFamily, KernelParams, Likelihood, SvgpState};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `n` uniform points in `[0, 1]^d` with a smooth response.
pub fn dataset(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Bounds::unit(d).sample_matrix(n, &mut rng);
    let y = DVector::from_fn(n, |i, _| x.row(i).iter().enumerate().map(|(j, v)| (3.0 * v + j as f64).sin()).sum());
    Dataset::new(x, y).expect("consistent shapes")
}

pub fn kernel(d: usize) -> KernelParams {
    KernelParams::isotropic(KernelFamily::Matern52, d, 0.3, 1.0).expect("valid kernel")
}

/// Gaussian SVGP on the first `m` rows of `data` with its optimal `q(u)`.
pub fn model(data: &Dataset, m: usize) -> SvgpState {
    let z = data.x.rows(0, m).into_owned();
    let mut s = SvgpState::new(z, kernel(data.dim()), Likelihood::Gaussian { noise: 0.01 }, true).expect("valid state");
    s.set_optimal_variational(data).expect("optimal q(u)");
    s
}
