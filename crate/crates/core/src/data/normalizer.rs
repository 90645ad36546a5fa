use super::{TransitionDataset, TransitionSchema};
use crate::error::{Error, Result};

const MIN_STD: f64 = 1e-8;

/// Per-column affine map to zero mean and unit (population) standard deviation.
///
/// Terminal columns are passed through untouched (mean 0, std 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    mean: Vec<f64>,
    std: Vec<f64>,
    terminal_mask: Vec<bool>,
}

impl Normalizer {
    /// Fits column statistics; constant columns get std 1.
    pub fn fit(dataset: &TransitionDataset) -> Result<Self> {
        let n = dataset.count();
        if n < 2 {
            return Err(Error::invalid(format!(
                "normalizer needs at least 2 rows, got {n}"
            )));
        }
        let dim = dataset.row_dim();
        let mask = dataset.schema().terminal_mask();
        let mut mean = vec![0.0f64; dim];
        for row in dataset.rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += f64::from(v);
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0f64; dim];
        for row in dataset.rows() {
            for ((s, &v), m) in var.iter_mut().zip(row).zip(&mean) {
                let d = f64::from(v) - m;
                *s += d * d;
            }
        }
        let mut std: Vec<f64> = var.iter().map(|s| (s / n as f64).sqrt()).collect();
        for j in 0..dim {
            if mask[j] {
                mean[j] = 0.0;
                std[j] = 1.0;
            } else if std[j] < MIN_STD {
                std[j] = 1.0;
            }
        }
        Ok(Self {
            mean,
            std,
            terminal_mask: mask,
        })
    }

    /// Rebuilds a normalizer from stored statistics.
    pub fn from_parts(mean: Vec<f64>, std: Vec<f64>, terminal_mask: Vec<bool>) -> Result<Self> {
        let dim = mean.len();
        if std.len() != dim || terminal_mask.len() != dim {
            return Err(Error::invalid("normalizer part lengths differ"));
        }
        for j in 0..dim {
            if !(std[j] > 0.0) || !std[j].is_finite() || !mean[j].is_finite() {
                return Err(Error::invalid(format!("bad statistics in column {j}")));
            }
            if terminal_mask[j] && (mean[j] != 0.0 || std[j] != 1.0) {
                return Err(Error::invalid(format!("terminal column {j} must be identity")));
            }
        }
        Ok(Self {
            mean,
            std,
            terminal_mask,
        })
    }

    pub fn identity(schema: &TransitionSchema) -> Self {
        let dim = schema.row_dim();
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
            terminal_mask: schema.terminal_mask(),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn terminal_mask(&self) -> &[bool] {
        &self.terminal_mask
    }

    fn check(&self, len: usize) -> Result<()> {
        if !len.is_multiple_of(self.dim()) {
            return Err(Error::invalid(format!(
                "payload of {len} values does not match normalizer dim {}",
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn normalize_rows(&self, rows: &mut [f32]) -> Result<()> {
        self.check(rows.len())?;
        for row in rows.chunks_exact_mut(self.dim()) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = ((f64::from(*v) - m) / s) as f32;
            }
        }
        Ok(())
    }

    pub fn denormalize_rows(&self, rows: &mut [f32]) -> Result<()> {
        self.check(rows.len())?;
        for row in rows.chunks_exact_mut(self.dim()) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (f64::from(*v) * s + m) as f32;
            }
        }
        Ok(())
    }

    pub fn normalize(&self, dataset: &TransitionDataset) -> Result<TransitionDataset> {
        if dataset.row_dim() != self.dim() {
            return Err(Error::invalid(format!(
                "dataset row_dim {} does not match normalizer dim {}",
                dataset.row_dim(),
                self.dim()
            )));
        }
        let mut rows = dataset.as_slice().to_vec();
        self.normalize_rows(&mut rows)?;
        Ok(TransitionDataset::from_parts_unchecked(dataset.schema(), rows))
    }
}
