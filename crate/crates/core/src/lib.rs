//! Explained-variance adaptation (EVA) for LoRA adapters.
//!
//! Streams layer-input activations through an incremental SVD, scores the
//! resulting components by explained variance, spreads a fixed rank budget
//! across layers and initializes each adapter's `A` from the leading
//! right-singular vectors. A small dense/attention network with manual
//! backprop serves as the host model.

pub mod adapter;
pub mod alloc;
pub mod cli;
pub mod error;
pub mod io;
pub mod linalg;
pub mod net;
pub mod pipeline;
pub mod seed;
pub mod svdstream;
pub mod svg;
pub mod train;

pub use adapter::{init_adapters, AdapterSet, InitKind, InitMode, LoraAdapter};
pub use alloc::{explained_variance_ratio, redistribute_ranks, Measure, RankAllocation};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use net::{Batch, Loss, ToyNetwork};
pub use pipeline::Experiment;
pub use svdstream::{run_initialization_pass, StreamConfig, SvdState};
pub use train::{finetune, TrainConfig};
