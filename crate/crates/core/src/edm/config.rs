use crate::error::{Error, Result};

/// Sampler, training-noise and optimization settings of the diffusion model.
///
/// Sampler defaults are the ImageNet-64 EDM values with 128 steps; the
/// training noise distribution and loss weighting follow the EDM defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct EdmConfig {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub s_churn: f64,
    pub s_tmin: f64,
    pub s_tmax: f64,
    pub s_noise: f64,
    /// Number of sampler steps `N`.
    pub steps: usize,
    /// Data scale used by the preconditioning. Rows are normalized, so 1.
    pub sigma_data: f64,
    pub rho: f64,
    /// Training noise levels are drawn as `ln σ ~ N(p_mean, p_std²)`.
    pub p_mean: f64,
    pub p_std: f64,
    pub train_steps: usize,
    /// `None` applies the dataset-size rule of [`EdmConfig::batch_size_for`].
    pub batch_size: Option<usize>,
    pub lr: f64,
    pub log_every: usize,
    /// Generation chunk size (memory only; results do not depend on it).
    pub chunk_size: usize,
    /// Clamp generated rows to the per-column range seen in training.
    pub clamp: bool,
}

impl Default for EdmConfig {
    fn default() -> Self {
        Self {
            sigma_min: 0.002,
            sigma_max: 80.0,
            s_churn: 80.0,
            s_tmin: 0.05,
            s_tmax: 50.0,
            s_noise: 1.003,
            steps: 128,
            sigma_data: 1.0,
            rho: 7.0,
            p_mean: -1.2,
            p_std: 1.2,
            train_steps: 100_000,
            batch_size: None,
            lr: 3e-4,
            log_every: 1_000,
            chunk_size: 16_384,
            clamp: false,
        }
    }
}

/// Datasets below this size (and all online training) use the small batch.
pub const LARGE_DATASET_ROWS: usize = 1_000_000;

impl EdmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.sigma_min > 0.0 && self.sigma_min < self.sigma_max) {
            return bad(format!(
                "need 0 < sigma_min < sigma_max, got {} and {}",
                self.sigma_min, self.sigma_max
            ));
        }
        if self.steps < 2 {
            return bad(format!("sampler needs at least 2 steps, got {}", self.steps));
        }
        if !(self.s_tmin < self.s_tmax) {
            return bad(format!("need s_tmin < s_tmax, got {} and {}", self.s_tmin, self.s_tmax));
        }
        if !(self.sigma_data > 0.0 && self.p_std > 0.0 && self.rho > 0.0 && self.s_noise > 0.0) {
            return bad("sigma_data, p_std, rho and s_noise must be positive".into());
        }
        if self.s_churn < 0.0 {
            return bad("s_churn must be non-negative".into());
        }
        if self.batch_size == Some(0) || self.chunk_size == 0 || self.log_every == 0 {
            return bad("batch_size, chunk_size and log_every must be positive".into());
        }
        if !(self.lr > 0.0) {
            return bad("learning rate must be positive".into());
        }
        Ok(())
    }

    /// 256 for online training and datasets under a million rows, else 1024.
    pub fn batch_size_for(&self, dataset_rows: usize, online: bool) -> usize {
        self.batch_size.unwrap_or(if online || dataset_rows < LARGE_DATASET_ROWS {
            256
        } else {
            1024
        })
    }

    /// Churn factor applied at noise level `sigma`.
    pub fn gamma(&self, sigma: f64) -> f64 {
        if sigma >= self.s_tmin && sigma <= self.s_tmax {
            (self.s_churn / self.steps as f64).min(std::f64::consts::SQRT_2 - 1.0)
        } else {
            0.0
        }
    }
}

/// Width, depth and Fourier size of the denoising network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenoiserConfig {
    pub width: usize,
    pub depth: usize,
    pub rff_dim: usize,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self {
            width: 1024,
            depth: 6,
            rff_dim: 16,
        }
    }
}

/// EDM preconditioning coefficients at one noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preconditioning {
    pub c_skip: f64,
    pub c_out: f64,
    pub c_in: f64,
    pub c_noise: f64,
}

/// `D(x; σ) = c_skip x + c_out F(c_in x, c_noise)`.
pub fn precondition(sigma: f64, sigma_data: f64) -> Result<Preconditioning> {
    if !(sigma > 0.0) || !(sigma_data > 0.0) {
        return Err(Error::invalid(format!(
            "noise level {sigma} and sigma_data {sigma_data} must be positive"
        )));
    }
    let s2 = sigma * sigma;
    let d2 = sigma_data * sigma_data;
    let norm = (s2 + d2).sqrt();
    Ok(Preconditioning {
        c_skip: d2 / (s2 + d2),
        c_out: sigma * sigma_data / norm,
        c_in: 1.0 / norm,
        c_noise: sigma.ln() / 4.0,
    })
}

/// Loss weight `(σ² + σ_data²) / (σ σ_data)²`.
pub fn loss_weight(sigma: f64, sigma_data: f64) -> f64 {
    (sigma * sigma + sigma_data * sigma_data) / (sigma * sigma_data).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetry_point() {
        let p = precondition(0.7, 0.7).unwrap();
        assert!((p.c_skip - 0.5).abs() < 1e-15);
        assert!((p.c_out - 0.7 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn small_sigma_limit() {
        let p = precondition(1e-6, 1.0).unwrap();
        assert!((p.c_skip - 1.0).abs() < 1e-11);
        assert!(p.c_out < 1.1e-6);
    }

    #[test]
    fn large_sigma_values() {
        // 1/6401 and 1/sqrt(6401), evaluated independently
        let p = precondition(80.0, 1.0).unwrap();
        assert!((p.c_skip - 1.562_255_9e-4).abs() < 1e-10);
        assert!((p.c_in - 0.012_499_023_55).abs() < 1e-10);
        assert!((p.c_noise - 80f64.ln() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_positive_sigma() {
        assert!(precondition(0.0, 1.0).is_err());
        assert!(precondition(-1.0, 1.0).is_err());
        assert!(precondition(1.0, 0.0).is_err());
    }

    #[test]
    fn unit_weight_at_data_scale() {
        assert_eq!(loss_weight(1.0, 1.0), 2.0);
        // λ c_out² = 1 for every σ
        for s in [0.01, 0.3, 1.0, 7.0, 80.0] {
            let p = precondition(s, 1.0).unwrap();
            assert!((loss_weight(s, 1.0) * p.c_out * p.c_out - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_rule_and_gamma() {
        let c = EdmConfig::default();
        assert_eq!(c.batch_size_for(200_000, false), 256);
        assert_eq!(c.batch_size_for(2_000_000, false), 1024);
        assert_eq!(c.batch_size_for(2_000_000, true), 256);
        // 80 / 128 exceeds the sqrt(2) - 1 cap
        assert!((c.gamma(10.0) - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        let mild = EdmConfig { s_churn: 20.0, ..EdmConfig::default() };
        assert!((mild.gamma(0.05) - 20.0 / 128.0).abs() < 1e-15);
        assert_eq!(c.gamma(60.0), 0.0);
        assert_eq!(c.gamma(0.01), 0.0);
        assert!(c.validate().is_ok());
        let bad = EdmConfig {
            sigma_min: 100.0,
            ..EdmConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
