//! Kernels, exact GP regression and random Fourier features.

pub mod exact;
pub mod kernel;
pub mod rff;

pub use exact::{fit_exact_gp, ExactFitOptions, ExactGp};
pub use kernel::{KernelFamily, KernelParams};
pub use rff::{sample_rff_basis, RffBasis};

/// Affine map between model space and observation space: `y = offset + scale·f`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutputTransform {
    pub offset: f64,
    pub scale: f64,
}

impl Default for OutputTransform {
    fn default() -> Self {
        Self { offset: 0.0, scale: 1.0 }
    }
}

impl OutputTransform {
    /// Empirical mean and standard deviation; a constant series keeps unit scale.
    pub fn standardizing(y: &[f64]) -> Self {
        if y.is_empty() {
            return Self::default();
        }
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        Self {
            offset: mean,
            scale: if sd > 1e-12 { sd } else { 1.0 },
        }
    }

    pub fn forward(&self, y: f64) -> f64 {
        (y - self.offset) / self.scale
    }

    pub fn inverse(&self, f: f64) -> f64 {
        self.offset + self.scale * f
    }
}
