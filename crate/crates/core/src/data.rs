//! Datasets and box-bounded search spaces.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs stored row-wise (`N × d`) with one observation per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        Ok(Self { x, y })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            x: DMatrix::zeros(0, dim),
            y: DVector::zeros(0),
        }
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }

    /// Appends rows of `x` with observations `y`.
    pub fn extend(&mut self, x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
        if x.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.ncols(),
            });
        }
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        let n = self.len();
        let mut xs = DMatrix::zeros(n + x.nrows(), self.dim());
        xs.rows_mut(0, n).copy_from(&self.x);
        xs.rows_mut(n, x.nrows()).copy_from(x);
        let mut ys = DVector::zeros(n + y.len());
        ys.rows_mut(0, n).copy_from(&self.y);
        for (i, v) in y.iter().enumerate() {
            ys[n + i] = *v;
        }
        self.x = xs;
        self.y = ys;
        Ok(())
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        let x = self.x.select_rows(indices);
        let y = DVector::from_iterator(indices.len(), indices.iter().map(|&i| self.y[i]));
        Dataset { x, y }
    }
}

/// Axis-aligned box `[lower_i, upper_i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidParameter("bounds must have at least one dimension".into()));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u))
        {
            return Err(Error::InvalidParameter("bounds must be finite with lower < upper".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn unit(dim: usize) -> Self {
        Self {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self {
            lower: vec![lo; dim],
            upper: vec![hi; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn clip(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| rng.random_range(*l..=*u))
            .collect()
    }

    /// `n` uniform points, one per row.
    pub fn sample_matrix<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let d = self.dim();
        let mut out = DMatrix::zeros(n, d);
        for i in 0..n {
            for k in 0..d {
                out[(i, k)] = rng.random_range(self.lower[k]..=self.upper[k]);
            }
        }
        out
    }

    /// Maps a point of the unit cube onto this box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, h))| (l + v * (h - l)).clamp(*l, *h))
            .collect()
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, h))| (v - l) / (h - l))
            .collect()
    }
}

pub(crate) fn row_vec(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn extend_appends_rows() {
        let mut d = Dataset::empty(2);
        d.extend(&DMatrix::from_row_slice(1, 2, &[0.1, 0.2]), &[1.0]).unwrap();
        d.extend(&DMatrix::from_row_slice(2, 2, &[0.3, 0.4, 0.5, 0.6]), &[2.0, 3.0])
            .unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.row(2), vec![0.5, 0.6]);
        assert_eq!(d.y.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn bounds_reject_inverted_box() {
        assert!(Bounds::new(vec![1.0], vec![0.0]).is_err());
        assert!(Bounds::new(vec![0.0, 0.0], vec![1.0]).is_err());
    }

    #[test]
    fn samples_stay_inside() {
        let b = Bounds::new(vec![-5.0, 0.0], vec![10.0, 1.0]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let m = b.sample_matrix(200, &mut rng);
        for i in 0..200 {
            assert!(b.contains(&row_vec(&m, i)));
        }
        let u = b.to_unit(&[2.5, 0.5]);
        assert_eq!(b.from_unit(&u), vec![2.5, 0.5]);
    }
}
