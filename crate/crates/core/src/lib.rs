//! Synthetic experience replay.
//!
//! A diffusion model is trained on flattened RL transitions `[s | a | r | s' | d]`
//! and then sampled to upsample offline datasets or to populate a synthetic
//! replay buffer during online training.

pub mod agents;
pub mod augment;
pub(crate) mod bytes;
pub mod config;
pub mod data;
pub mod edm;
pub mod envs;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod rng;

pub use error::{Error, Result};
