use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::sampler::{run_chain, sigma_schedule};
use super::DiffusionModel;
use crate::data::{threshold_terminals, TransitionDataset};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

const RETRY_SALT: u64 = 0x0005_eed0_f7e7;

/// Draws `count` raw rows: `x ~ N(0, σ_0² I)`, the full stochastic schedule,
/// denormalization, optional clamping, and terminal thresholding.
///
/// Row `i` uses its own random stream keyed by `(seed, i)`, so output is
/// independent of chunking and thread count. Rows that come out non-finite
/// are redrawn once from a second stream before an error is raised.
pub fn generate(model: &DiffusionModel, count: usize, seed: u64) -> Result<TransitionDataset> {
    let dim = model.dim();
    let chunk = model.config.chunk_size.max(1);
    let starts: Vec<usize> = (0..count).step_by(chunk).collect();
    let parts: Vec<Vec<f32>> = starts
        .into_par_iter()
        .map(|start| generate_rows(model, start..(start + chunk).min(count), seed))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(count * dim);
    for p in parts {
        rows.extend(p);
    }
    Ok(TransitionDataset::from_parts_unchecked(model.schema, rows))
}

fn draw(model: &DiffusionModel, rngs: &mut [Rng], schedule: &[f64]) -> Result<Vec<f64>> {
    let dim = model.dim();
    let mut x = Vec::with_capacity(rngs.len() * dim);
    for r in rngs.iter_mut() {
        for _ in 0..dim {
            let z: f64 = StandardNormal.sample(r);
            x.push(z * schedule[0]);
        }
    }
    run_chain(model, &mut x, schedule, &model.config, rngs)?;
    Ok(x)
}

fn generate_rows(model: &DiffusionModel, rows: std::ops::Range<usize>, seed: u64) -> Result<Vec<f32>> {
    let dim = model.dim();
    let schedule = sigma_schedule(&model.config);
    let mut rngs: Vec<Rng> = rows.clone().map(|i| rng::stream(seed, i as u64)).collect();
    let mut x = draw(model, &mut rngs, &schedule)?;

    let bad: Vec<usize> = (0..rows.len())
        .filter(|&i| x[i * dim..(i + 1) * dim].iter().any(|v| !v.is_finite()))
        .collect();
    if !bad.is_empty() {
        let retry_seed = rng::derive_seed(seed, RETRY_SALT);
        let mut retry: Vec<Rng> = bad
            .iter()
            .map(|&i| rng::stream(retry_seed, (rows.start + i) as u64))
            .collect();
        let redo = draw(model, &mut retry, &schedule)?;
        for (k, &i) in bad.iter().enumerate() {
            let fresh = &redo[k * dim..(k + 1) * dim];
            if fresh.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "row {} stayed non-finite after regeneration",
                    rows.start + i
                )));
            }
            x[i * dim..(i + 1) * dim].copy_from_slice(fresh);
        }
    }

    let mut out: Vec<f32> = x.iter().map(|&v| v as f32).collect();
    model.normalizer.denormalize_rows(&mut out)?;
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("generated rows overflow after denormalization".into()));
    }
    if model.config.clamp {
        if let Some((lo, hi)) = &model.data_range {
            for row in out.chunks_exact_mut(dim) {
                for j in 0..dim {
                    row[j] = row[j].clamp(lo[j], hi[j]);
                }
            }
        }
    }
    threshold_terminals(&model.schema, &mut out);
    Ok(out)
}
