//! Dense SPD factorisations and the incremental conditional-variance recursion
//! behind greedy (quality-weighted) DPP MAP selection.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gp::KernelParams;

/// Smallest non-zero jitter tried by the ladder.
pub const JITTER_START: f64 = 1e-8;
/// Largest jitter tried before giving up.
pub const JITTER_CAP: f64 = 1e-4;
/// Residual variances below this are treated as zero.
pub const VARIANCE_FLOOR: f64 = 1e-12;

const BLOCK: usize = 96;

/// Lower Cholesky factor of `A + jitter·I`.
#[derive(Clone, Debug)]
pub struct SpdFactor {
    l: DMatrix<f64>,
    jitter: f64,
}

impl SpdFactor {
    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn logdet(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// `L⁻¹`, computed blockwise.
    pub fn lower_inverse(&self) -> DMatrix<f64> {
        lower_triangular_inverse(&self.l)
    }

    /// `A⁻¹` (of the jittered matrix).
    pub fn inverse(&self) -> DMatrix<f64> {
        let li = self.lower_inverse();
        li.transpose() * li
    }

    /// `L⁻¹ B`.
    pub fn solve_lower(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(b.nrows())?;
        Ok(self
            .l
            .solve_lower_triangular(b)
            .expect("factor has positive diagonal"))
    }

    pub fn solve_lower_vec(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(b.len())?;
        Ok(self
            .l
            .solve_lower_triangular(b)
            .expect("factor has positive diagonal"))
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let y = self.solve_lower_vec(b)?;
        Ok(self
            .l
            .tr_solve_lower_triangular(&y)
            .expect("factor has positive diagonal"))
    }

    fn check(&self, rows: usize) -> Result<()> {
        if rows != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: rows,
            });
        }
        Ok(())
    }
}

/// Factorises `a + jitter·I`, escalating the jitter ×10 from [`JITTER_START`]
/// up to [`JITTER_CAP`] on failure. Only the lower triangle of `a` is read.
pub fn factorize(a: &DMatrix<f64>, jitter: f64) -> Result<SpdFactor> {
    factorize_with_cap(a, jitter, JITTER_CAP)
}

pub fn factorize_with_cap(a: &DMatrix<f64>, jitter: f64, cap: f64) -> Result<SpdFactor> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n.max(1),
            got: a.ncols(),
        });
    }
    let mut jitter = jitter.max(0.0);
    loop {
        let mut work = a.clone();
        if jitter > 0.0 {
            for i in 0..n {
                work[(i, i)] += jitter;
            }
        }
        if cholesky_in_place(&mut work) {
            return Ok(SpdFactor { l: work, jitter });
        }
        let next = if jitter < JITTER_START {
            JITTER_START
        } else {
            jitter * 10.0
        };
        if next > cap * (1.0 + 1e-9) {
            return Err(Error::NotPositiveDefinite { cap });
        }
        log::debug!("cholesky failed at jitter {jitter:e}; retrying with {next:e}");
        jitter = next;
    }
}

/// `A⁻¹ B` via two triangular solves.
pub fn solve(factor: &SpdFactor, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let y = factor.solve_lower(b)?;
    Ok(factor
        .l
        .tr_solve_lower_triangular(&y)
        .expect("factor has positive diagonal"))
}

/// Right-looking blocked Cholesky; leaves `L` in the lower triangle and zeros above.
fn cholesky_in_place(a: &mut DMatrix<f64>) -> bool {
    let n = a.nrows();
    if n <= 2 * BLOCK {
        return match a.clone().cholesky() {
            Some(c) => {
                *a = c.unpack();
                true
            }
            None => false,
        };
    }
    let mut k = 0;
    while k < n {
        let b = BLOCK.min(n - k);
        let diag = a.view((k, k), (b, b)).clone_owned();
        let l11 = match diag.cholesky() {
            Some(c) => c.unpack(),
            None => return false,
        };
        if !l11.diagonal().iter().all(|v| v.is_finite() && *v > 0.0) {
            return false;
        }
        a.view_mut((k, k), (b, b)).copy_from(&l11);
        let rest = n - k - b;
        if rest > 0 {
            let l11_inv_t = lower_triangular_inverse(&l11).transpose();
            let a21 = a.view((k + b, k), (rest, b)).clone_owned();
            let l21 = a21 * l11_inv_t;
            a.view_mut((k + b, k), (rest, b)).copy_from(&l21);
            let update = &l21 * l21.transpose();
            let mut a22 = a.view_mut((k + b, k + b), (rest, rest));
            a22 -= update;
        }
        k += b;
    }
    for j in 1..n {
        for i in 0..j {
            a[(i, j)] = 0.0;
        }
    }
    true
}

/// Inverse of a lower-triangular matrix with nonzero diagonal.
pub fn lower_triangular_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    if n <= BLOCK {
        return l
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .expect("nonzero diagonal");
    }
    let h = n / 2;
    let x11 = lower_triangular_inverse(&l.view((0, 0), (h, h)).clone_owned());
    let x22 = lower_triangular_inverse(&l.view((h, h), (n - h, n - h)).clone_owned());
    let l21 = l.view((h, 0), (n - h, h));
    let x21 = -(&x22 * (l21 * &x11));
    let mut out = DMatrix::zeros(n, n);
    out.view_mut((0, 0), (h, h)).copy_from(&x11);
    out.view_mut((h, h), (n - h, n - h)).copy_from(&x22);
    out.view_mut((h, 0), (n - h, h)).copy_from(&x21);
    out
}

/// Incremental state of greedy selection: for every candidate the residual
/// conditional variance of a noise-free GP given the points chosen so far,
/// maintained by rank-1 (pivoted Cholesky) updates.
#[derive(Clone, Debug)]
pub struct GreedySelectionState {
    scaled: Vec<f64>,
    kernel: KernelParams,
    selected: Vec<usize>,
    taken: Vec<bool>,
    residual: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

fn check_quality(quality: &[f64], n: usize) -> Result<()> {
    if quality.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: quality.len(),
        });
    }
    if quality.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
        return Err(Error::InvalidParameter("quality values must be finite and nonnegative".into()));
    }
    Ok(())
}

/// Starts a selection over the rows of `x`; every residual equals the prior variance.
pub fn init_selection(x: &DMatrix<f64>, kernel: &KernelParams, quality: &[f64]) -> Result<GreedySelectionState> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::EmptyCandidates);
    }
    if x.ncols() != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            got: x.ncols(),
        });
    }
    check_quality(quality, n)?;
    let residual = (0..n)
        .map(|i| {
            let r: Vec<f64> = x.row(i).iter().copied().collect();
            kernel.eval_unchecked(&r, &r)
        })
        .collect();
    Ok(GreedySelectionState {
        scaled: kernel.scaled_rows(x),
        kernel: kernel.clone(),
        selected: Vec::new(),
        taken: vec![false; n],
        residual,
        rows: Vec::new(),
    })
}

impl GreedySelectionState {
    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    /// Current `σ²_j(x)` for every candidate.
    pub fn residual_variances(&self) -> &[f64] {
        &self.residual
    }

    pub fn n_candidates(&self) -> usize {
        self.taken.len()
    }

    /// Picks `argmax q(x)·σ_j(x)` over unselected candidates (lowest index on
    /// ties) and conditions every residual on the new point.
    pub fn select_next(&mut self, quality: &[f64]) -> Result<usize> {
        let n = self.n_candidates();
        check_quality(quality, n)?;
        if self.selected.len() == n {
            return Err(Error::Exhausted);
        }
        let max_var = (0..n)
            .filter(|&i| !self.taken[i])
            .map(|i| self.residual[i])
            .fold(f64::NEG_INFINITY, f64::max);
        if max_var < VARIANCE_FLOOR {
            return Err(Error::DegenerateVariance {
                selected: self.selected.len(),
                max_variance: max_var,
            });
        }
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            if self.taken[i] || self.residual[i] < VARIANCE_FLOOR {
                continue;
            }
            let score = quality[i] * self.residual[i].sqrt();
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((i, score));
            }
        }
        let (pick, _) = best.expect("at least one candidate above the variance floor");
        self.condition_on(pick);
        Ok(pick)
    }

    fn condition_on(&mut self, pick: usize) {
        let n = self.n_candidates();
        let d = self.kernel.dim();
        let scaled = &self.scaled;
        let p = &scaled[pick * d..(pick + 1) * d];
        let pivot = self.residual[pick].sqrt();
        let mut row = vec![0.0; n];
        for (i, out) in row.iter_mut().enumerate() {
            let s = crate::gp::kernel::sq_dist(p, &scaled[i * d..(i + 1) * d]);
            let mut v = self.kernel.profile(s).0;
            for prev in &self.rows {
                v -= prev[pick] * prev[i];
            }
            *out = v / pivot;
        }
        for i in 0..n {
            let r = self.residual[i] - row[i] * row[i];
            self.residual[i] = if r < 0.0 { 0.0 } else { r };
        }
        self.residual[pick] = 0.0;
        self.taken[pick] = true;
        self.selected.push(pick);
        self.rows.push(row);
    }
}

/// Runs up to `m` greedy steps. Stops early (returning what was chosen) once
/// every remaining residual is below [`VARIANCE_FLOOR`].
pub fn greedy_select(x: &DMatrix<f64>, kernel: &KernelParams, quality: &[f64], m: usize) -> Result<Vec<usize>> {
    greedy_select_with_residuals(x, kernel, quality, m).map(|(s, _)| s)
}

/// As [`greedy_select`], also returning the final residual variances.
pub fn greedy_select_with_residuals(
    x: &DMatrix<f64>,
    kernel: &KernelParams,
    quality: &[f64],
    m: usize,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut state = init_selection(x, kernel, quality)?;
    let m = m.min(x.nrows());
    while state.selected().len() < m {
        match state.select_next(quality) {
            Ok(_) => {}
            Err(Error::DegenerateVariance { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    Ok((state.selected, state.residual))
}
