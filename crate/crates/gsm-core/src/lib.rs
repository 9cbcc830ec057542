//! Global sparse momentum SGD: a momentum optimizer that splits each update
//! into gradient-driven (active) and decay-only (passive) parts using a
//! per-iteration global saliency ranking, so that a chosen fraction of the
//! weights is driven toward zero during training and can be pruned at the
//! end without finetuning.
//!
//! The crate is organized as:
//!
//! - [`tensor`]: dense deterministic `f32` arrays, matmul/im2col/top-q.
//! - [`rng`]: pinned xoshiro256** generator and purpose-keyed streams.
//! - [`nn`]: layer kinds, analytic forward/backward, cross-entropy, eval.
//! - [`optim`]: momentum SGD, saliency selection, the sparse update rule,
//!   and the passive-decay planning calculus.
//! - [`prune`]: global magnitude pruning, compression accounting, and
//!   layer sensitivity scans.
//! - [`data`]: dataset loaders/generators, checkpoints, metrics CSV, and
//!   run-configuration parsing.
//! - [`exp`]: the training loops and experiment protocols (base, sparse,
//!   frozen-mask ablation, winning-ticket workflow).

pub mod data;
pub mod error;
pub mod exp;
pub mod nn;
pub mod optim;
pub mod prune;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
