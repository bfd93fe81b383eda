//! Minimal differentiable computation core.
//!
//! There is no graph. Each primitive exposes a forward function and a
//! backward function; callers keep whatever forward context the backward
//! needs (inputs, outputs or a cache struct) and accumulate parameter
//! gradients into [`Parameter::grad`].

mod checkpoint;
mod gradcheck;
mod lstm;
mod ops;
mod optim;
mod tensor;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use lstm::{LstmCache, LstmCell};
pub use ops::{
    affine_backward, affine_forward, cross_entropy, matvec, matvec_transposed, softmax,
    softmax_backward, softmax_cross_entropy_grad, Activation, CE_EPSILON, LEAKY_SLOPE,
};
pub use optim::{OptimKind, OptimState};
pub use tensor::{Parameter, ParamSet, Tensor};

use crate::rng::Rng;
use rand::Rng as _;

/// Uniform initialization in `[-bound, bound]`.
pub fn init_uniform(p: &mut Parameter, bound: f64, rng: &mut Rng) {
    for v in p.value.data_mut() {
        *v = rng.random_range(-bound..=bound);
    }
}

/// Xavier-style uniform initialization for a 2-D weight `[fan_out, fan_in]`.
pub fn init_xavier(p: &mut Parameter, rng: &mut Rng) {
    let shape = p.value.shape().to_vec();
    let (fan_out, fan_in) = match shape.as_slice() {
        [o, i] => (*o, *i),
        [n] => (*n, 1),
        _ => (1, 1),
    };
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    init_uniform(p, bound, rng);
}
