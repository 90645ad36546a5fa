//! Residual MLP with Fourier noise embedding, exact backprop and Adam.

mod adam;
pub mod checkpoint;
mod gradcheck;
mod mlp;
mod scalar;

pub use adam::{cosine_lr, Adam, DEFAULT_LR};
pub use checkpoint::{decode_network, encode_network, load_network, save_network};
pub use gradcheck::{grad_check, GradCheckReport};
pub use mlp::{ForwardCache, Gradients, NetShape, ResidualMlp};
pub use scalar::Scalar;
