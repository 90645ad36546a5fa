//! Stochastic EDM sampler: churn, Euler step along the probability-flow ODE
//! and a second-order Heun correction.

use rand_distr::{Distribution, StandardNormal};

use super::EdmConfig;
use crate::error::Result;
use crate::rng::Rng;

/// A denoiser `D(x; σ)` over batches of row-major `f64` rows.
pub trait Denoiser: Sync {
    fn dim(&self) -> usize;

    /// Writes `D(x; σ)` for every row of `x` into `out`.
    fn denoise(&self, x: &[f64], sigma: f64, out: &mut [f64]) -> Result<()>;
}

/// Score estimate `∇ log p(x; σ) ≈ (D(x; σ) − x) / σ²`.
pub fn score<D: Denoiser + ?Sized>(denoiser: &D, x: &[f64], sigma: f64) -> Result<Vec<f64>> {
    let mut d = vec![0.0; x.len()];
    denoiser.denoise(x, sigma, &mut d)?;
    Ok(d.iter().zip(x).map(|(dv, xv)| (dv - xv) / (sigma * sigma)).collect())
}

/// `[σ_0, …, σ_{N−1}, 0]` with `σ_i = (σ_max^{1/ρ} + i/(N−1) (σ_min^{1/ρ} − σ_max^{1/ρ}))^ρ`.
pub fn sigma_schedule(config: &EdmConfig) -> Vec<f64> {
    let n = config.steps.max(2);
    let inv_rho = 1.0 / config.rho;
    let hi = config.sigma_max.powf(inv_rho);
    let lo = config.sigma_min.powf(inv_rho);
    let mut out: Vec<f64> = (0..n)
        .map(|i| (hi + i as f64 / (n - 1) as f64 * (lo - hi)).powf(config.rho))
        .collect();
    // pin the endpoints exactly
    out[0] = config.sigma_max;
    out[n - 1] = config.sigma_min;
    out.push(0.0);
    out
}

/// Advances every row of `x` from `sigma_cur` to `sigma_next`.
///
/// `rngs` holds one generator per row; noise is only drawn when the churn
/// factor at `sigma_cur` is non-zero.
pub fn sample_step<D: Denoiser + ?Sized>(
    denoiser: &D,
    x: &mut [f64],
    sigma_cur: f64,
    sigma_next: f64,
    config: &EdmConfig,
    rngs: &mut [Rng],
) -> Result<()> {
    let dim = denoiser.dim();
    debug_assert_eq!(x.len(), rngs.len() * dim);
    let gamma = config.gamma(sigma_cur);
    let sigma_hat = sigma_cur * (1.0 + gamma);
    if gamma > 0.0 {
        let scale = (sigma_hat * sigma_hat - sigma_cur * sigma_cur).sqrt() * config.s_noise;
        for (row, rng) in x.chunks_exact_mut(dim).zip(rngs.iter_mut()) {
            for v in row {
                let e: f64 = StandardNormal.sample(rng);
                *v += scale * e;
            }
        }
    }
    let x_hat = x.to_vec();
    let mut den = vec![0.0; x.len()];
    denoiser.denoise(&x_hat, sigma_hat, &mut den)?;
    let h = sigma_next - sigma_hat;
    let slope: Vec<f64> = x_hat
        .iter()
        .zip(&den)
        .map(|(xv, dv)| (xv - dv) / sigma_hat)
        .collect();
    for ((v, xh), d) in x.iter_mut().zip(&x_hat).zip(&slope) {
        *v = xh + h * d;
    }
    if sigma_next > 0.0 {
        denoiser.denoise(x, sigma_next, &mut den)?;
        for (((v, xh), d), dn) in x.iter_mut().zip(&x_hat).zip(&slope).zip(&den) {
            let d_next = (*v - dn) / sigma_next;
            *v = xh + h * 0.5 * (d + d_next);
        }
    }
    Ok(())
}

/// Runs the full schedule from `x` (already scaled to `σ_0`).
pub fn run_chain<D: Denoiser + ?Sized>(
    denoiser: &D,
    x: &mut [f64],
    schedule: &[f64],
    config: &EdmConfig,
    rngs: &mut [Rng],
) -> Result<()> {
    for pair in schedule.windows(2) {
        sample_step(denoiser, x, pair[0], pair[1], config, rngs)?;
    }
    Ok(())
}
