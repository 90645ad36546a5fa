//! EDM-style diffusion over normalized transition rows.

pub mod checkpoint;
mod config;
mod gaussian;
mod generate;
mod model;
mod sampler;

pub use checkpoint::{decode_model, encode_model, load_model, save_model};
pub use config::{loss_weight, precondition, DenoiserConfig, EdmConfig, Preconditioning};
pub use gaussian::GaussianDenoiser;
pub use generate::generate;
pub use model::{train, DiffusionModel, DiffusionTrainer, LossPoint};
pub use sampler::{run_chain, sample_step, score, sigma_schedule, Denoiser};
