//! Standard-normal helpers and Gauss–Hermite quadrature.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, SymmetricEigen};
use libm::erfc;

pub const LN_2: f64 = std::f64::consts::LN_2;

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// `log Φ(x)`, accurate far into the lower tail.
pub fn log_norm_cdf(x: f64) -> f64 {
    if x > -30.0 {
        return norm_cdf(x).ln();
    }
    // Φ(x) ≈ φ(x)/|x| · (1 − 1/x² + 3/x⁴)
    let x2 = x * x;
    -0.5 * x2 - (2.0 * PI).sqrt().ln() - (-x).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
}

/// `φ(x)/Φ(x)`, stable for very negative `x`.
pub fn inv_mills(x: f64) -> f64 {
    if x > -30.0 {
        norm_pdf(x) / norm_cdf(x)
    } else {
        (-0.5 * x * x - (2.0 * PI).sqrt().ln() - log_norm_cdf(x)).exp()
    }
}

/// Physicists' Gauss–Hermite rule: `∫ e^{−t²} g(t) dt ≈ Σ w_i g(t_i)`.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub–Welsch: nodes are eigenvalues of the Jacobi matrix.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut j = DMatrix::zeros(n, n);
        for i in 1..n {
            let b = (i as f64 / 2.0).sqrt();
            j[(i, i - 1)] = b;
            j[(i - 1, i)] = b;
        }
        let eig = SymmetricEigen::new(j);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], PI.sqrt() * v * v)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    /// `E[g(f)]` for `f ~ N(mu, var)`.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mu: f64, var: f64, mut g: F) -> f64 {
        let s = (2.0 * var.max(0.0)).sqrt();
        let mut acc = 0.0;
        for (t, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * g(mu + s * t);
        }
        acc / PI.sqrt()
    }
}

/// Binary entropy in nats.
pub fn bernoulli_entropy(p: f64) -> f64 {
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.ln();
    }
    if p < 1.0 {
        h -= (1.0 - p) * (1.0 - p).ln();
    }
    h
}
