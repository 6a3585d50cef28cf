use crate::benchmarks::{hypervolume_2d, nondominated, zdt3_max_form, zdt3_reference};
use crate::error::{Error, Result};

/// Regret of the queried point with the highest posterior mean:
/// `optimum − truth[argmax mean]`, with values below 1e-12 reported as 0.
/// Returns the regret and the chosen index (lowest index on ties).
pub fn simple_regret(means: &[f64], truth: &[f64], optimum: f64) -> Result<(f64, usize)> {
    if means.is_empty() {
        return Err(Error::EmptyData);
    }
    if means.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: means.len(),
            got: truth.len(),
        });
    }
    let mut best = 0;
    for (i, m) in means.iter().enumerate() {
        if *m > means[best] {
            best = i;
        }
    }
    let r = optimum - truth[best];
    Ok((if r < 1e-12 { 0.0 } else { r }, best))
}

/// Fraction of `probabilities` on the same side of 1/2 as the `{0, 1}` labels.
pub fn classification_accuracy(probabilities: &[f64], labels: &[f64]) -> f64 {
    if probabilities.is_empty() {
        return f64::NAN;
    }
    let hits = probabilities
        .iter()
        .zip(labels)
        .filter(|(p, y)| (**p > 0.5) == (**y > 0.5))
        .count();
    hits as f64 / probabilities.len() as f64
}

/// `true_hv − HV(truth of the points nondominated under the model means)`,
/// clamped at zero. `means` are maximisation-form model means per point;
/// `native` holds the noise-free two-objective values (minimisation form).
pub fn hypervolume_difference(means: &[Vec<f64>], native: &[[f64; 2]], true_hv: f64) -> f64 {
    let front: Vec<[f64; 2]> = nondominated(means).into_iter().map(|i| zdt3_max_form(native[i])).collect();
    (true_hv - hypervolume_2d(&front, zdt3_reference())).max(0.0)
}
