//! Transition tuples, datasets, normalization and replay buffers.

mod buffer;
mod dataset;
pub mod io;
mod normalizer;
mod schema;

pub use buffer::{ReplayPair, RingBuffer, DEFAULT_SYNTHETIC_CAPACITY};
pub use dataset::{threshold_terminals, TransitionDataset};
pub use io::{export_csv, import_csv, load_dataset, save_dataset};
pub use normalizer::Normalizer;
pub use schema::TransitionSchema;
