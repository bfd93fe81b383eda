//! Curiosity-driven reinforcement learning for paragraph generation.
//!
//! The crate is organised bottom-up:
//!
//! - [`diffkernel`]: dense tensors, parameters with accumulated gradients,
//!   hand-written forward/backward primitives, optimizers, gradient checking
//!   and the checkpoint container.
//! - [`corpus`]: vocabulary, tokenization, dataset manifests and the synthetic
//!   scene grammar.
//! - [`policy`]: the two-layer attention LSTM policy with sampling, greedy and
//!   beam-search decoding.
//! - [`curiosity`]: state embedding plus the state- and action-prediction
//!   networks that produce dense intrinsic rewards.
//! - [`rewards`]: terminal metric rewards, TD(lambda) returns and the
//!   policy-gradient surrogate loss.
//! - [`metrics`]: BLEU, CIDEr and diversity-graph statistics.
//! - [`trainer`]: the joint training loop, schedules and evaluation.

pub mod corpus;
pub mod curiosity;
pub mod diffkernel;
mod error;
pub mod metrics;
pub mod policy;
pub mod rewards;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
