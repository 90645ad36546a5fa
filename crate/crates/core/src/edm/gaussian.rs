//! Closed-form denoiser for Gaussian data.

use super::sampler::Denoiser;
use crate::error::{Error, Result};

/// Optimal denoiser for data `N(μ, Σ)`:
/// `D*(x; σ) = μ + Σ (Σ + σ² I)⁻¹ (x − μ)`.
#[derive(Debug, Clone)]
pub struct GaussianDenoiser {
    mean: Vec<f64>,
    cov: Vec<f64>,
}

impl GaussianDenoiser {
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d * d {
            return Err(Error::invalid("covariance must be d × d"));
        }
        Ok(Self { mean, cov })
    }

    pub fn isotropic(mean: Vec<f64>, var: f64) -> Self {
        let d = mean.len();
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            cov[i * d + i] = var;
        }
        Self { mean, cov }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &[f64] {
        &self.cov
    }

    /// `Σ (Σ + σ² I)⁻¹`, row-major.
    fn gain(&self, sigma: f64) -> Result<Vec<f64>> {
        let d = self.mean.len();
        let mut a = self.cov.clone();
        for i in 0..d {
            a[i * d + i] += sigma * sigma;
        }
        let inv = invert(&a, d)?;
        let mut g = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                g[i * d + j] = (0..d).map(|k| self.cov[i * d + k] * inv[k * d + j]).sum();
            }
        }
        Ok(g)
    }
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert(a: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; d * d];
    for i in 0..d {
        inv[i * d + i] = 1.0;
    }
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&x, &y| m[x * d + col].abs().total_cmp(&m[y * d + col].abs()))
            .unwrap();
        if m[pivot * d + col].abs() < 1e-300 {
            return Err(Error::Numeric("singular matrix".into()));
        }
        for k in 0..d {
            m.swap(col * d + k, pivot * d + k);
            inv.swap(col * d + k, pivot * d + k);
        }
        let p = m[col * d + col];
        for k in 0..d {
            m[col * d + k] /= p;
            inv[col * d + k] /= p;
        }
        for r in 0..d {
            if r != col {
                let f = m[r * d + col];
                if f != 0.0 {
                    for k in 0..d {
                        m[r * d + k] -= f * m[col * d + k];
                        inv[r * d + k] -= f * inv[col * d + k];
                    }
                }
            }
        }
    }
    Ok(inv)
}

impl Denoiser for GaussianDenoiser {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn denoise(&self, x: &[f64], sigma: f64, out: &mut [f64]) -> Result<()> {
        let d = self.mean.len();
        let g = self.gain(sigma)?;
        for (row, o) in x.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            for i in 0..d {
                o[i] = self.mean[i]
                    + (0..d).map(|j| g[i * d + j] * (row[j] - self.mean[j])).sum::<f64>();
            }
        }
        Ok(())
    }
}
