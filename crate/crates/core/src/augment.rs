//! Hand-designed augmentation baselines for upsampling comparisons.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::data::{TransitionDataset, TransitionSchema};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Perturbation applied to the states of a transition. Actions, rewards and
/// terminals are never touched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AugmentationScheme {
    /// `s += ε₁`, `s' += ε₂` with `ε ~ N(0, σ²I)` in raw units.
    Additive { sigma: f64 },
    /// `s, s'` both scaled by one scalar `~ U[low, high]`.
    Multiplicative { low: f64, high: f64 },
    /// `s' ← s + ε (s' − s)` with scalar `ε ~ U[low, high]`.
    Dynamics { low: f64, high: f64 },
}

impl AugmentationScheme {
    pub const ADDITIVE: Self = Self::Additive { sigma: 0.1 };
    pub const MULTIPLICATIVE: Self = Self::Multiplicative { low: 0.8, high: 1.2 };
    pub const DYNAMICS: Self = Self::Dynamics { low: 0.5, high: 1.5 };

    pub fn name(&self) -> &'static str {
        match self {
            Self::Additive { .. } => "additive",
            Self::Multiplicative { .. } => "multiplicative",
            Self::Dynamics { .. } => "dynamics",
        }
    }

    /// The default-parameter scheme of the given kind.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "additive" => Ok(Self::ADDITIVE),
            "multiplicative" => Ok(Self::MULTIPLICATIVE),
            "dynamics" => Ok(Self::DYNAMICS),
            other => Err(Error::Config(format!(
                "unknown augmentation {other:?} (expected additive, multiplicative or dynamics)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Additive { sigma } => sigma.is_finite() && sigma > 0.0,
            Self::Multiplicative { low, high } | Self::Dynamics { low, high } => {
                low.is_finite() && high.is_finite() && low > 0.0 && low <= high
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid {} augmentation parameters: {self:?}", self.name())))
        }
    }

    fn uniform(low: f64, high: f64, rng: &mut Rng) -> f64 {
        if low == high {
            low
        } else {
            rng.random_range(low..=high)
        }
    }
}

/// Augments one row in place.
pub fn augment_row(schema: &TransitionSchema, row: &mut [f32], scheme: &AugmentationScheme, rng: &mut Rng) {
    debug_assert_eq!(row.len(), schema.row_dim());
    let (sr, nr) = (schema.state_range(), schema.next_state_range());
    match *scheme {
        AugmentationScheme::Additive { sigma } => {
            let noise = Normal::new(0.0, sigma).expect("validated sigma");
            for j in sr.chain(nr) {
                row[j] = (f64::from(row[j]) + noise.sample(rng)) as f32;
            }
        }
        AugmentationScheme::Multiplicative { low, high } => {
            let k = AugmentationScheme::uniform(low, high, rng);
            for j in sr.chain(nr) {
                row[j] = (f64::from(row[j]) * k) as f32;
            }
        }
        AugmentationScheme::Dynamics { low, high } => {
            let eps = AugmentationScheme::uniform(low, high, rng);
            if eps == 1.0 {
                return;
            }
            for (i, j) in sr.zip(nr) {
                let (s, n) = (f64::from(row[i]), f64::from(row[j]));
                row[j] = (s + eps * (n - s)) as f32;
            }
        }
    }
}

/// Keeps every original row and appends `target_count − count` augmented
/// copies of uniformly drawn originals. Row `k` of the appended block uses its
/// own RNG stream, so the output does not depend on thread count.
pub fn upsample_with_augmentation(
    dataset: &TransitionDataset,
    scheme: &AugmentationScheme,
    target_count: usize,
    seed: u64,
) -> Result<TransitionDataset> {
    scheme.validate()?;
    let n = dataset.count();
    if target_count < n {
        return Err(Error::invalid(format!(
            "target count {target_count} is below the dataset size {n}"
        )));
    }
    if n == 0 && target_count > 0 {
        return Err(Error::invalid("cannot upsample an empty dataset"));
    }
    let schema = dataset.schema();
    let dim = schema.row_dim();
    let mut rows = dataset.as_slice().to_vec();
    rows.resize(target_count * dim, 0.0);
    rows[n * dim..]
        .par_chunks_exact_mut(dim)
        .enumerate()
        .for_each(|(k, out)| {
            let mut r = rng::stream(seed, k as u64);
            out.copy_from_slice(dataset.row(r.random_range(0..n)));
            augment_row(&schema, out, scheme, &mut r);
        });
    TransitionDataset::new(schema, rows)
}
