//! Visual-language policy: a two-layer LSTM with top-down attention.
//!
//! Step `t` (starting from `<bos>` and zero states):
//!
//! ```text
//! s_vis, c_vis   = LSTM_vis([s_lang_prev, W_v mean(v), W_e[y_prev]], s_vis_prev, c_vis_prev)
//! a              = softmax_i( w_att . tanh(W_v v_i + W_h s_vis) )
//! v_hat          = sum_i a_i v_i
//! s_lang, c_lang = LSTM_lang([v_hat, s_vis], s_lang_prev, c_lang_prev)
//! pi(. | s_t)    = softmax(W_p s_lang + b_p)
//! ```
//!
//! The same `W_v` projects the mean-pooled features and each region.

mod decode;
mod net;

pub use decode::{beam_search, greedy, Hypothesis, StepModel};
pub use net::{Episode, PolicyDecoder, PolicyNet, PolicyState, RolloutTrace, SceneContext};
