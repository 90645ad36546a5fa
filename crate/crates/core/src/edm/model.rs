use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::sampler::Denoiser;
use super::{loss_weight, precondition, DenoiserConfig, EdmConfig};
use crate::data::{Normalizer, TransitionDataset, TransitionSchema};
use crate::error::{Error, Result};
use crate::nn::{Adam, NetShape, ResidualMlp};
use crate::rng::{self, Rng};

/// Preconditioned residual-MLP denoiser over normalized transition rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionModel {
    pub(crate) net: ResidualMlp<f32>,
    pub(crate) config: EdmConfig,
    pub(crate) normalizer: Normalizer,
    pub(crate) schema: TransitionSchema,
    /// Per-column raw range of the training data, used by the optional clamp.
    pub(crate) data_range: Option<(Vec<f32>, Vec<f32>)>,
}

impl DiffusionModel {
    pub fn new(
        schema: TransitionSchema,
        normalizer: Normalizer,
        denoiser: DenoiserConfig,
        config: EdmConfig,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let dim = schema.row_dim();
        if normalizer.dim() != dim {
            return Err(Error::invalid(format!(
                "normalizer has {} columns, schema row_dim is {dim}",
                normalizer.dim()
            )));
        }
        let shape = NetShape {
            in_dim: dim,
            out_dim: dim,
            width: denoiser.width,
            depth: denoiser.depth,
            rff_dim: denoiser.rff_dim,
        };
        if denoiser.rff_dim == 0 {
            return Err(Error::Config("denoiser needs a noise embedding (rff_dim > 0)".into()));
        }
        let net = ResidualMlp::new(shape, &mut rng::seeded(seed))?;
        Ok(Self {
            net,
            config,
            normalizer,
            schema,
            data_range: None,
        })
    }

    pub fn schema(&self) -> TransitionSchema {
        self.schema
    }

    pub fn config(&self) -> &EdmConfig {
        &self.config
    }

    pub fn config_mut(&mut self) -> &mut EdmConfig {
        &mut self.config
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    /// Replaces the normalizer (the network weights are kept).
    pub fn set_normalizer(&mut self, normalizer: Normalizer) -> Result<()> {
        if normalizer.dim() != self.schema.row_dim() {
            return Err(Error::invalid("normalizer width does not match the model"));
        }
        self.normalizer = normalizer;
        Ok(())
    }

    /// Records per-column bounds of `dataset`, used when clamping is enabled.
    pub fn fit_data_range(&mut self, dataset: &TransitionDataset) {
        self.data_range = Some(column_range(dataset));
    }

    pub fn net(&self) -> &ResidualMlp<f32> {
        &self.net
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }

    pub fn dim(&self) -> usize {
        self.schema.row_dim()
    }

    /// `D(x; σ)` for normalized rows, one noise level per row.
    pub fn denoise_rows(&self, x: &[f64], sigmas: &[f64]) -> Result<Vec<f64>> {
        let dim = self.dim();
        let batch = sigmas.len();
        if x.len() != batch * dim {
            return Err(Error::invalid("row and noise-level counts disagree"));
        }
        let pre = sigmas
            .iter()
            .map(|&s| precondition(s, self.config.sigma_data))
            .collect::<Result<Vec<_>>>()?;
        let input: Vec<f32> = x
            .chunks_exact(dim)
            .zip(&pre)
            .flat_map(|(row, p)| row.iter().map(move |v| (v * p.c_in) as f32))
            .collect();
        let codes: Vec<f32> = pre.iter().map(|p| p.c_noise as f32).collect();
        let f = self.net.predict(&input, Some(&codes))?;
        Ok(x.chunks_exact(dim)
            .zip(f.chunks_exact(dim))
            .zip(&pre)
            .flat_map(|((row, fr), p)| {
                row.iter()
                    .zip(fr)
                    .map(move |(v, o)| p.c_skip * v + p.c_out * f64::from(*o))
            })
            .collect())
    }

    /// Score estimate `(D(x; σ) − x) / σ²` at a shared noise level.
    pub fn score(&self, x: &[f64], sigma: f64) -> Result<Vec<f64>> {
        super::sampler::score(self, x, sigma)
    }

    /// Denoising loss on a batch of normalized rows and its parameter gradient.
    ///
    /// Per row: `σ = exp(p_mean + p_std z)`, `ε ~ N(0, σ² I)`,
    /// `λ(σ) ‖D(x + ε; σ) − x‖²`; the loss is the batch mean.
    pub fn training_loss<R: rand::Rng + ?Sized>(
        &self,
        batch: &[f32],
        rng: &mut R,
    ) -> Result<(f64, Vec<f32>)> {
        let dim = self.dim();
        if batch.is_empty() || !batch.len().is_multiple_of(dim) {
            return Err(Error::invalid("training batch is empty or misshapen"));
        }
        let b = batch.len() / dim;
        let c = &self.config;
        let mut sigmas = Vec::with_capacity(b);
        let mut noisy = Vec::with_capacity(batch.len());
        for row in batch.chunks_exact(dim) {
            let z: f64 = StandardNormal.sample(rng);
            let sigma = (c.p_mean + c.p_std * z).exp();
            sigmas.push(sigma);
            for &v in row {
                let e: f64 = StandardNormal.sample(rng);
                noisy.push(f64::from(v) + sigma * e);
            }
        }
        let pre = sigmas
            .iter()
            .map(|&s| precondition(s, c.sigma_data))
            .collect::<Result<Vec<_>>>()?;
        let input: Vec<f32> = noisy
            .chunks_exact(dim)
            .zip(&pre)
            .flat_map(|(row, p)| row.iter().map(move |v| (v * p.c_in) as f32))
            .collect();
        let codes: Vec<f32> = pre.iter().map(|p| p.c_noise as f32).collect();
        let (f, cache) = self.net.forward(&input, Some(&codes))?;

        let mut loss = 0.0;
        let mut out_grad = vec![0.0f32; f.len()];
        for i in 0..b {
            let p = &pre[i];
            let w = loss_weight(sigmas[i], c.sigma_data);
            let span = i * dim..(i + 1) * dim;
            for j in span {
                let d = p.c_skip * noisy[j] + p.c_out * f64::from(f[j]);
                let resid = d - f64::from(batch[j]);
                loss += w * resid * resid;
                out_grad[j] = (2.0 * w * resid * p.c_out / b as f64) as f32;
            }
        }
        let grads = self.net.backward(&cache, &out_grad)?;
        Ok((loss / b as f64, grads.params))
    }
}

impl Denoiser for DiffusionModel {
    fn dim(&self) -> usize {
        self.schema.row_dim()
    }

    fn denoise(&self, x: &[f64], sigma: f64, out: &mut [f64]) -> Result<()> {
        let batch = x.len() / self.dim();
        let d = self.denoise_rows(x, &vec![sigma; batch])?;
        out.copy_from_slice(&d);
        Ok(())
    }
}

/// Mean training loss over a logging window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossPoint {
    pub step: usize,
    pub loss: f64,
}

/// Optimizer state that persists across training rounds (online fine-tuning).
#[derive(Debug, Clone)]
pub struct DiffusionTrainer {
    adam: Adam<f32>,
    rng: Rng,
    steps_done: usize,
}

impl DiffusionTrainer {
    pub fn new(model: &DiffusionModel, seed: u64) -> Self {
        Self {
            adam: Adam::new(model.param_count()),
            rng: rng::seeded(seed),
            steps_done: 0,
        }
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    /// Runs `steps` Adam updates on uniformly drawn batches of `normalized`
    /// rows with a cosine schedule spanning this round.
    pub fn run(
        &mut self,
        model: &mut DiffusionModel,
        normalized: &[f32],
        steps: usize,
        batch_size: usize,
    ) -> Result<Vec<LossPoint>> {
        let dim = model.dim();
        let count = normalized.len() / dim;
        if count == 0 {
            return Err(Error::UnavailableData("no rows to train the diffusion model on".into()));
        }
        let log_every = model.config.log_every;
        let lr0 = model.config.lr;
        let mut trace = Vec::new();
        let mut window = 0.0;
        let mut in_window = 0;
        let mut batch = Vec::with_capacity(batch_size * dim);
        for step in 0..steps {
            batch.clear();
            for _ in 0..batch_size {
                let i = self.rng.random_range(0..count);
                batch.extend_from_slice(&normalized[i * dim..(i + 1) * dim]);
            }
            let (loss, grads) = model.training_loss(&batch, &mut self.rng)?;
            let global = self.steps_done + step;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence {
                    step: global,
                    message: format!("loss {loss}, recent window mean {}", window / in_window.max(1) as f64),
                });
            }
            self.adam.step(model.net.params_mut(), &grads, crate::nn::cosine_lr(step, steps, lr0));
            window += loss;
            in_window += 1;
            if in_window == log_every || step + 1 == steps {
                trace.push(LossPoint {
                    step: global + 1,
                    loss: window / in_window as f64,
                });
                window = 0.0;
                in_window = 0;
            }
        }
        self.steps_done += steps;
        Ok(trace)
    }
}

/// Per-column min and max of raw rows.
pub(crate) fn column_range(dataset: &TransitionDataset) -> (Vec<f32>, Vec<f32>) {
    let dim = dataset.row_dim();
    let mut lo = vec![f32::INFINITY; dim];
    let mut hi = vec![f32::NEG_INFINITY; dim];
    for row in dataset.rows() {
        for j in 0..dim {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    (lo, hi)
}

/// Trains on raw `dataset` for `config.train_steps` steps using the model's
/// attached normalizer. Deterministic given `seed`.
pub fn train(model: &mut DiffusionModel, dataset: &TransitionDataset, seed: u64) -> Result<Vec<LossPoint>> {
    if dataset.schema() != model.schema {
        return Err(Error::invalid("dataset schema does not match the model"));
    }
    let normalized = model.normalizer.normalize(dataset)?;
    model.data_range = Some(column_range(dataset));
    let steps = model.config.train_steps;
    let batch = model.config.batch_size_for(dataset.count(), false);
    let mut trainer = DiffusionTrainer::new(model, seed);
    trainer.run(model, normalized.as_slice(), steps, batch)
}
