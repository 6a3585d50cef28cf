//! Trace and divergence diagnostics of an inducing set.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::gp::KernelParams;
use crate::numerics::{factorize, VARIANCE_FLOOR};

/// Rows `R` (one per usable inducing point) with `Q_X(Z) = RᵀR`, built by
/// a Cholesky recursion over `Z` in its given order. Inducing points whose
/// conditional variance has fallen below the floor add nothing and are
/// skipped, so near-duplicate inducing points never need jitter.
fn nystrom_factor(x: &DMatrix<f64>, z: &DMatrix<f64>, kernel: &KernelParams) -> Result<DMatrix<f64>> {
    if z.nrows() == 0 {
        return Err(Error::EmptyCandidates);
    }
    let kz = kernel.gram(z)?;
    let kzx = kernel.matrix(z, x)?;
    let (m, n) = (z.nrows(), x.nrows());
    let floor = VARIANCE_FLOOR * kernel.amplitude2();
    let mut rz = DMatrix::<f64>::zeros(m, m);
    let mut rx = DMatrix::<f64>::zeros(m, n);
    let mut t = 0;
    for j in 0..m {
        let cj = rz.view((0, j), (t, 1)).clone_owned();
        let var = kz[(j, j)] - cj.norm_squared();
        if var <= floor {
            continue;
        }
        let s = var.sqrt();
        let mut row_z = kz.row(j).transpose() - rz.rows(0, t).tr_mul(&cj);
        row_z /= s;
        let mut row_x = kzx.row(j).transpose() - rx.rows(0, t).tr_mul(&cj);
        row_x /= s;
        rz.set_row(t, &row_z.transpose());
        rx.set_row(t, &row_x.transpose());
        t += 1;
    }
    Ok(rx.rows(0, t).clone_owned())
}

/// Diagonal of `K_X − Q_X(Z)`, clamped at zero.
pub fn nystrom_residual(x: &DMatrix<f64>, z: &DMatrix<f64>, kernel: &KernelParams) -> Result<Vec<f64>> {
    let r = nystrom_factor(x, z, kernel)?;
    let a2 = kernel.amplitude2();
    Ok((0..x.nrows()).map(|i| (a2 - r.column(i).norm_squared()).max(0.0)).collect())
}

/// `Σ_i q(x_i)² ([K_X]_ii − [Q_X(Z)]_ii)`.
pub fn weighted_trace(x: &DMatrix<f64>, z: &DMatrix<f64>, kernel: &KernelParams, quality: &[f64]) -> Result<f64> {
    if quality.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: quality.len(),
        });
    }
    let r = nystrom_residual(x, z, kernel)?;
    Ok(r.iter().zip(quality).map(|(r, q)| q * q * r).sum())
}

/// `KL[N(0, a) ‖ N(0, b)]` for SPD `a`, `b`.
pub fn gaussian_kl(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let fa = factorize(a, 0.0)?;
    let fb = factorize(b, 0.0)?;
    let w = fb.solve_lower(fa.l())?;
    let n = a.nrows() as f64;
    Ok(0.5 * (w.norm_squared() - n + fb.logdet() - fa.logdet()))
}

/// Trace term `t_A` over the rows of `x_a` and the expected divergence
/// `E_y[KL(Q‖P)] = t_A/(2σ²) + KL[N(0, K_A+σ²I) ‖ N(0, Q_A+σ²I)]` between
/// the optimal sparse posterior and the exact one, restricted to `x_a`.
pub fn region_kl_diagnostic(x_a: &DMatrix<f64>, z: &DMatrix<f64>, kernel: &KernelParams, noise: f64) -> Result<(f64, f64)> {
    if x_a.nrows() == 0 {
        return Err(Error::EmptyData);
    }
    let n = x_a.nrows();
    let a = nystrom_factor(x_a, z, kernel)?;
    let mut q = a.tr_mul(&a);
    let mut k = kernel.gram(x_a)?;
    let mut t = 0.0;
    for i in 0..n {
        t += (k[(i, i)] - q[(i, i)]).max(0.0);
        k[(i, i)] += noise;
        q[(i, i)] += noise;
    }
    let kl = gaussian_kl(&k, &q)?.max(0.0);
    Ok((t, t / (2.0 * noise) + kl))
}

/// `Σ_{m>M} η_m`, the smallest trace any `M`-point Nyström approximation of
/// `K_X` can reach.
pub fn spectral_floor(x: &DMatrix<f64>, kernel: &KernelParams, m: usize) -> Result<f64> {
    let mut eig: Vec<f64> = SymmetricEigen::new(kernel.gram(x)?).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    Ok(eig.iter().skip(m).map(|v| v.max(0.0)).sum())
}
