//! Raw test functions on their native domains, in minimisation form.

use std::f64::consts::{E, PI};

use crate::stats::norm_cdf;

const SHEKEL_A: [[f64; 4]; 10] = [
    [4.0, 4.0, 4.0, 4.0],
    [1.0, 1.0, 1.0, 1.0],
    [8.0, 8.0, 8.0, 8.0],
    [6.0, 6.0, 6.0, 6.0],
    [3.0, 7.0, 3.0, 7.0],
    [2.0, 9.0, 2.0, 9.0],
    [5.0, 5.0, 3.0, 3.0],
    [8.0, 1.0, 8.0, 1.0],
    [6.0, 2.0, 6.0, 2.0],
    [7.0, 3.6, 7.0, 3.6],
];
const SHEKEL_C: [f64; 10] = [0.1, 0.2, 0.2, 0.4, 0.4, 0.6, 0.3, 0.7, 0.5, 0.5];

/// Shekel with ten terms on `[0, 10]⁴`.
pub fn shekel4(x: &[f64]) -> f64 {
    -SHEKEL_A
        .iter()
        .zip(SHEKEL_C)
        .map(|(a, c)| 1.0 / (x.iter().zip(a).map(|(xi, ai)| (xi - ai).powi(2)).sum::<f64>() + c))
        .sum::<f64>()
}

/// Michalewicz with steepness 10 on `[0, π]⁵`.
pub fn michalewicz5(x: &[f64]) -> f64 {
    -x.iter()
        .enumerate()
        .map(|(i, xi)| xi.sin() * ((i + 1) as f64 * xi * xi / PI).sin().powi(20))
        .sum::<f64>()
}

/// Ackley on `[−32.768, 32.768]⁵`.
pub fn ackley5(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / n;
    let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / n;
    -20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + E
}

const HARTMANN_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const HARTMANN_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const HARTMANN_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

/// Hartmann on `[0, 1]⁶`.
pub fn hartmann6(x: &[f64]) -> f64 {
    -(0..4)
        .map(|i| {
            let e: f64 = (0..6).map(|j| HARTMANN_A[i][j] * (x[j] - HARTMANN_P[i][j]).powi(2)).sum();
            HARTMANN_ALPHA[i] * (-e).exp()
        })
        .sum::<f64>()
}

/// Rosenbrock on `[−5, 10]⁴`.
pub fn rosenbrock4(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (w[0] - 1.0).powi(2))
        .sum()
}

/// ZDT3 with four inputs on `[0, 1]⁴`; both objectives minimised.
pub fn zdt3_4d(x: &[f64]) -> [f64; 2] {
    let f1 = x[0];
    let g = 1.0 + 9.0 * x[1..].iter().sum::<f64>() / (x.len() - 1) as f64;
    let r = f1 / g;
    [f1, g * (1.0 - r.sqrt() - r * (10.0 * PI * f1).sin())]
}

/// Bumps of the classification latent: centre, amplitude, width.
const BUMPS: [([f64; 2], f64, f64); 3] = [([0.25, 0.3], 4.0, 0.12), ([0.7, 0.65], 4.0, 0.15), ([0.3, 0.8], 3.5, 0.1)];
const THRESHOLD: f64 = 1.5;

/// Latent `g` of the synthetic classification field on `[0, 1]²`; labels
/// are `Bern(Φ(g))` and the Bayes boundary is `g = 0`.
pub fn classification_latent(x: &[f64]) -> f64 {
    BUMPS
        .iter()
        .map(|(c, a, s)| a * (-((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (2.0 * s * s)).exp())
        .sum::<f64>()
        - THRESHOLD
}

pub fn classification_probability(x: &[f64]) -> f64 {
    norm_cdf(classification_latent(x))
}

pub fn classification_centres() -> impl Iterator<Item = [f64; 2]> {
    BUMPS.iter().map(|b| b.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_values() {
        assert_eq!(michalewicz5(&[0.0; 5]), 0.0);
        let spot = -(PI / 2.0).sin() * ((PI / 2.0).powi(2) / PI).sin().powi(20);
        assert_relative_eq!(michalewicz5(&[PI / 2.0, 0.0, 0.0, 0.0, 0.0]), spot, epsilon = 1e-15);
        assert_eq!(rosenbrock4(&[1.0; 4]), 0.0);
        assert_eq!(rosenbrock4(&[0.0; 4]), 3.0);
        let on_valley: [f64; 4] = [1.5, 2.25, 5.0625, 25.62890625];
        let tail: f64 = on_valley[..3].iter().map(|v| (v - 1.0).powi(2)).sum();
        assert_relative_eq!(rosenbrock4(&on_valley), tail, epsilon = 1e-9);
        assert!(ackley5(&[0.0; 5]).abs() < 1e-14);
        assert_eq!(zdt3_4d(&[0.0; 4]), [0.0, 1.0]);
    }

    #[test]
    fn classification_geometry() {
        for c in classification_centres() {
            assert!(classification_probability(&c) > 0.5);
        }
        for corner in [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] {
            assert!(classification_probability(&corner) < 0.5);
        }
    }
}
