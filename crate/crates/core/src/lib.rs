//! Analytics for masked-language-model probing: accuracy per token, confusion
//! clusters, embedding similarity, classification confidence and label-field
//! signal-to-noise statistics.
//!
//! With the default `parallel` feature the heavy loops run on the rayon
//! thread pool; without it they run sequentially. Results are identical
//! either way.

pub mod apt;
pub mod confidence;
pub mod confusion;
pub mod error;
pub mod io;
pub mod par;
pub mod percolation;
pub mod rng;
pub mod similarity;
pub mod snp;
pub mod stats;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::*;
