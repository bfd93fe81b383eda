//! Self-supervised curiosity: a state embedding `phi`, a state-prediction
//! network (SP-Net) and an action-prediction network (AP-Net).
//!
//! Transitions come from a [`RolloutTrace`]: `(s_t, y_t, s_{t+1})` for the
//! `T - 1` consecutive state pairs. Gradients stop at `s_t`, so neither loss
//! ever reaches the policy.

use crate::diffkernel::{
    affine_backward, affine_forward, cross_entropy, init_xavier, softmax, Activation, ParamSet, Parameter,
};
use crate::policy::RolloutTrace;
use crate::rng::Rng;
use crate::{Error, Result};

/// `phi(s) = leaky(W s + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEmbedding {
    pub w: Parameter,
    pub b: Parameter,
}

/// `G(phi_t, y_t) = W2 leaky(W1 [phi_t, E[y_t]] + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpNet {
    pub action_emb: Parameter,
    pub w1: Parameter,
    pub b1: Parameter,
    pub w2: Parameter,
    pub b2: Parameter,
}

/// `F(phi_t, phi_{t+1}) = softmax(W2 leaky(W1 [phi_t, phi_{t+1}] + b1) + b2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApNet {
    pub w1: Parameter,
    pub b1: Parameter,
    pub w2: Parameter,
    pub b2: Parameter,
}

macro_rules! param_set {
    ($ty:ty, $($f:ident),+) => {
        impl ParamSet for $ty {
            fn params(&self) -> Vec<&Parameter> {
                vec![$(&self.$f),+]
            }
            fn params_mut(&mut self) -> Vec<&mut Parameter> {
                vec![$(&mut self.$f),+]
            }
        }
    };
}

param_set!(StateEmbedding, w, b);
param_set!(SpNet, action_emb, w1, b1, w2, b2);
param_set!(ApNet, w1, b1, w2, b2);

#[derive(Debug, Clone, PartialEq)]
pub struct CuriosityNet {
    pub phi: StateEmbedding,
    pub sp: SpNet,
    pub ap: ApNet,
    state_dim: usize,
    embed_dim: usize,
    vocab: usize,
}

impl ParamSet for CuriosityNet {
    fn params(&self) -> Vec<&Parameter> {
        let mut v = self.phi.params();
        v.extend(self.sp.params());
        v.extend(self.ap.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut v = self.phi.params_mut();
        v.extend(self.sp.params_mut());
        v.extend(self.ap.params_mut());
        v
    }
}

struct Mlp<'a> {
    w1: &'a Parameter,
    b1: &'a Parameter,
    w2: &'a Parameter,
    b2: &'a Parameter,
}

/// Hidden pre-activation, hidden activation and output of a two-layer MLP.
fn mlp(net: Mlp<'_>, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let pre = affine_forward(net.w1, Some(net.b1), x).expect("shapes fixed at construction");
    let h = Activation::leaky().forward(&pre);
    let out = affine_forward(net.w2, Some(net.b2), &h).expect("shapes fixed at construction");
    (pre, h, out)
}

#[derive(Debug, Clone)]
struct Transition {
    action: usize,
    sp_x: Vec<f64>,
    sp_pre: Vec<f64>,
    sp_h: Vec<f64>,
    sp_pred: Vec<f64>,
    ap_x: Vec<f64>,
    ap_pre: Vec<f64>,
    ap_h: Vec<f64>,
    ap_dist: Vec<f64>,
}

/// Forward pass of both prediction networks over every transition of a trace.
#[derive(Debug, Clone)]
pub struct CuriosityPass {
    states: Vec<Vec<f64>>,
    phi_pre: Vec<Vec<f64>>,
    phi: Vec<Vec<f64>>,
    transitions: Vec<Transition>,
    /// Mean of `0.5 * |G(phi_t, y_t) - phi_{t+1}|^2`.
    pub sp_loss: f64,
    /// Mean cross-entropy of `y_t` under `F(phi_t, phi_{t+1})`.
    pub ap_loss: f64,
}

impl CuriosityPass {
    pub fn transitions(&self) -> usize {
        self.transitions.len()
    }

    /// `r^i_1 = 0` and `r^i_{t+1} = rho/2 |G(phi_t, y_t) - phi_{t+1}|^2`.
    pub fn intrinsic_rewards(&self, rho: f64) -> Result<Vec<f64>> {
        if rho.is_nan() || rho < 0.0 {
            return Err(Error::InvalidArgument(format!("rho must be nonnegative, got {rho}")));
        }
        let mut r = vec![0.0; self.states.len()];
        for (t, tr) in self.transitions.iter().enumerate() {
            r[t + 1] = 0.5 * rho * sq_dist(&tr.sp_pred, &self.phi[t + 1]);
        }
        Ok(r)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl CuriosityNet {
    pub fn zeros(state_dim: usize, embed_dim: usize, hidden: usize, vocab: usize) -> Self {
        Self {
            phi: StateEmbedding {
                w: Parameter::zeros("curiosity.phi.w", &[embed_dim, state_dim]),
                b: Parameter::zeros("curiosity.phi.b", &[embed_dim]),
            },
            sp: SpNet {
                action_emb: Parameter::zeros("curiosity.sp.action_emb", &[vocab, embed_dim]),
                w1: Parameter::zeros("curiosity.sp.w1", &[hidden, 2 * embed_dim]),
                b1: Parameter::zeros("curiosity.sp.b1", &[hidden]),
                w2: Parameter::zeros("curiosity.sp.w2", &[embed_dim, hidden]),
                b2: Parameter::zeros("curiosity.sp.b2", &[embed_dim]),
            },
            ap: ApNet {
                w1: Parameter::zeros("curiosity.ap.w1", &[hidden, 2 * embed_dim]),
                b1: Parameter::zeros("curiosity.ap.b1", &[hidden]),
                w2: Parameter::zeros("curiosity.ap.w2", &[vocab, hidden]),
                b2: Parameter::zeros("curiosity.ap.b2", &[vocab]),
            },
            state_dim,
            embed_dim,
            vocab,
        }
    }

    /// Xavier weights, zero biases.
    pub fn new(state_dim: usize, embed_dim: usize, hidden: usize, vocab: usize, rng: &mut Rng) -> Self {
        let mut net = Self::zeros(state_dim, embed_dim, hidden, vocab);
        for p in [
            &mut net.phi.w,
            &mut net.sp.action_emb,
            &mut net.sp.w1,
            &mut net.sp.w2,
            &mut net.ap.w1,
            &mut net.ap.w2,
        ] {
            init_xavier(p, rng);
        }
        net
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab
    }

    pub fn embed_state(&self, s: &[f64]) -> Result<Vec<f64>> {
        let pre = affine_forward(&self.phi.w, Some(&self.phi.b), s)?;
        Ok(Activation::leaky().forward(&pre))
    }

    pub fn predict_next_state(&self, phi_t: &[f64], action: usize) -> Result<Vec<f64>> {
        let x = self.sp_input(phi_t, action)?;
        Ok(mlp(self.sp_mlp(), &x).2)
    }

    pub fn predict_action(&self, phi_t: &[f64], phi_next: &[f64]) -> Result<Vec<f64>> {
        let x = self.ap_input(phi_t, phi_next)?;
        Ok(softmax(&mlp(self.ap_mlp(), &x).2))
    }

    fn sp_mlp(&self) -> Mlp<'_> {
        Mlp {
            w1: &self.sp.w1,
            b1: &self.sp.b1,
            w2: &self.sp.w2,
            b2: &self.sp.b2,
        }
    }

    fn ap_mlp(&self) -> Mlp<'_> {
        Mlp {
            w1: &self.ap.w1,
            b1: &self.ap.b1,
            w2: &self.ap.w2,
            b2: &self.ap.b2,
        }
    }

    fn sp_input(&self, phi_t: &[f64], action: usize) -> Result<Vec<f64>> {
        if phi_t.len() != self.embed_dim {
            return Err(Error::dim("SP-Net input", self.embed_dim, phi_t.len()));
        }
        if action >= self.vocab {
            return Err(Error::IndexOutOfRange {
                index: action,
                size: self.vocab,
            });
        }
        let mut x = phi_t.to_vec();
        x.extend_from_slice(self.sp.action_emb.value.row(action));
        Ok(x)
    }

    fn ap_input(&self, phi_t: &[f64], phi_next: &[f64]) -> Result<Vec<f64>> {
        if phi_t.len() != self.embed_dim || phi_next.len() != self.embed_dim {
            return Err(Error::dim("AP-Net input", self.embed_dim, phi_t.len().min(phi_next.len())));
        }
        let mut x = phi_t.to_vec();
        x.extend_from_slice(phi_next);
        Ok(x)
    }

    /// Runs both networks over the transitions of `trace`.
    ///
    /// Traces shorter than two steps have no transitions and zero losses.
    pub fn forward(&self, trace: &RolloutTrace) -> Result<CuriosityPass> {
        if trace.states.len() != trace.actions.len() {
            return Err(Error::dim("curiosity trace", trace.actions.len(), trace.states.len()));
        }
        let mut phi_pre = Vec::with_capacity(trace.states.len());
        let mut phi = Vec::with_capacity(trace.states.len());
        for s in &trace.states {
            let pre = affine_forward(&self.phi.w, Some(&self.phi.b), s)?;
            phi.push(Activation::leaky().forward(&pre));
            phi_pre.push(pre);
        }
        let n = trace.states.len().saturating_sub(1);
        let mut transitions = Vec::with_capacity(n);
        let (mut sp_sum, mut ap_sum) = (0.0, 0.0);
        for t in 0..n {
            let action = trace.actions[t];
            let sp_x = self.sp_input(&phi[t], action)?;
            let (sp_pre, sp_h, sp_pred) = mlp(self.sp_mlp(), &sp_x);
            sp_sum += 0.5 * sq_dist(&sp_pred, &phi[t + 1]);
            let ap_x = self.ap_input(&phi[t], &phi[t + 1])?;
            let (ap_pre, ap_h, logits) = mlp(self.ap_mlp(), &ap_x);
            let ap_dist = softmax(&logits);
            ap_sum += cross_entropy(&ap_dist, action)?;
            transitions.push(Transition {
                action,
                sp_x,
                sp_pre,
                sp_h,
                sp_pred,
                ap_x,
                ap_pre,
                ap_h,
                ap_dist,
            });
        }
        let denom = n.max(1) as f64;
        Ok(CuriosityPass {
            states: trace.states.clone(),
            phi_pre,
            phi,
            transitions,
            sp_loss: sp_sum / denom,
            ap_loss: ap_sum / denom,
        })
    }

    pub fn sp_loss(&self, trace: &RolloutTrace) -> Result<f64> {
        Ok(self.forward(trace)?.sp_loss)
    }

    pub fn ap_loss(&self, trace: &RolloutTrace) -> Result<f64> {
        Ok(self.forward(trace)?.ap_loss)
    }

    pub fn intrinsic_rewards(&self, trace: &RolloutTrace, rho: f64) -> Result<Vec<f64>> {
        self.forward(trace)?.intrinsic_rewards(rho)
    }

    /// Accumulates gradients of `sp_weight * sp_loss + ap_weight * ap_loss`.
    ///
    /// The SP target `phi(s_{t+1})` is a constant; the AP-Net sees gradients
    /// through both embeddings.
    pub fn backward(&mut self, pass: &CuriosityPass, sp_weight: f64, ap_weight: f64) {
        let n = pass.transitions.len();
        if n == 0 {
            return;
        }
        let z = self.embed_dim;
        let leaky = Activation::leaky();
        let mut d_phi = vec![vec![0.0; z]; pass.phi.len()];
        for (t, tr) in pass.transitions.iter().enumerate() {
            if sp_weight != 0.0 {
                let scale = sp_weight / n as f64;
                let d_pred: Vec<f64> = tr.sp_pred.iter().zip(&pass.phi[t + 1]).map(|(p, q)| scale * (p - q)).collect();
                let d_h = affine_backward(&mut self.sp.w2, Some(&mut self.sp.b2), &tr.sp_h, &d_pred);
                let d_pre = leaky.backward(&tr.sp_pre, &tr.sp_h, &d_h);
                let dx = affine_backward(&mut self.sp.w1, Some(&mut self.sp.b1), &tr.sp_x, &d_pre);
                for (a, b) in d_phi[t].iter_mut().zip(&dx[..z]) {
                    *a += b;
                }
                for (a, b) in self.sp.action_emb.grad.row_mut(tr.action).iter_mut().zip(&dx[z..]) {
                    *a += b;
                }
            }
            if ap_weight != 0.0 {
                let scale = ap_weight / n as f64;
                let mut d_logits: Vec<f64> = tr.ap_dist.iter().map(|p| scale * p).collect();
                d_logits[tr.action] -= scale;
                let d_h = affine_backward(&mut self.ap.w2, Some(&mut self.ap.b2), &tr.ap_h, &d_logits);
                let d_pre = leaky.backward(&tr.ap_pre, &tr.ap_h, &d_h);
                let dx = affine_backward(&mut self.ap.w1, Some(&mut self.ap.b1), &tr.ap_x, &d_pre);
                for (a, b) in d_phi[t].iter_mut().zip(&dx[..z]) {
                    *a += b;
                }
                for (a, b) in d_phi[t + 1].iter_mut().zip(&dx[z..]) {
                    *a += b;
                }
            }
        }
        for (t, d) in d_phi.iter().enumerate() {
            if d.iter().all(|&g| g == 0.0) {
                continue;
            }
            let d_pre = leaky.backward(&pass.phi_pre[t], &pass.phi[t], d);
            // dx is dropped: no gradient into the policy state.
            affine_backward(&mut self.phi.w, Some(&mut self.phi.b), &pass.states[t], &d_pre);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffkernel::{grad_check, init_uniform, GradCheckOptions};
    use crate::rng;
    use rand::Rng as _;

    fn trace(t: usize, state_dim: usize, vocab: usize, seed: u64) -> RolloutTrace {
        let mut r = rng::stream(seed, 7);
        RolloutTrace {
            actions: (0..t).map(|_| r.random_range(0..vocab)).collect(),
            log_probs: vec![-1.0; t],
            states: (0..t).map(|_| (0..state_dim).map(|_| r.random_range(-1.0..1.0)).collect()).collect(),
            attention: vec![vec![1.0]; t],
            terminated: false,
        }
    }

    fn generic_net(seed: u64) -> CuriosityNet {
        let mut net = CuriosityNet::zeros(8, 5, 6, 7);
        let mut r = rng::stream(seed, 3);
        for p in net.params_mut() {
            init_uniform(p, 0.6, &mut r);
        }
        net
    }

    #[test]
    fn zero_weights() {
        let net = CuriosityNet::zeros(4, 3, 5, 4);
        assert_eq!(net.embed_state(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0; 3]);
        assert_eq!(net.predict_next_state(&[0.3, 0.1, 0.2], 2).unwrap(), vec![0.0; 3]);
        let p = net.predict_action(&[0.3, 0.1, 0.2], &[1.0, 0.0, 0.0]).unwrap();
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        // uniform prediction over D = 4 costs ln 4
        let tr = trace(5, 4, 4, 1);
        assert!((net.ap_loss(&tr).unwrap() - 4f64.ln()).abs() < 1e-9);
        // zero predictor and zero embedding: perfect state prediction
        assert_eq!(net.sp_loss(&tr).unwrap(), 0.0);
        assert!(net.intrinsic_rewards(&tr, 1.0).unwrap().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn shape_errors() {
        let net = CuriosityNet::zeros(4, 3, 5, 4);
        assert!(net.embed_state(&[1.0]).is_err());
        assert!(net.predict_next_state(&[0.0; 3], 4).is_err());
        assert!(net.predict_action(&[0.0; 3], &[0.0; 2]).is_err());
        assert!(net.intrinsic_rewards(&trace(3, 4, 4, 0), -1.0).is_err());
    }

    #[test]
    fn single_transition_arithmetic() {
        // phi is the identity on nonnegative states; SP-Net outputs only its bias.
        let mut net = CuriosityNet::zeros(2, 2, 3, 3);
        net.phi.w.value.data_mut().copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        net.sp.b2.value.data_mut().copy_from_slice(&[0.5, 0.5]);
        let tr = RolloutTrace {
            actions: vec![1, 2],
            log_probs: vec![0.0; 2],
            states: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            attention: vec![vec![1.0]; 2],
            terminated: true,
        };
        // squared error 0.5 on one transition
        assert!((net.sp_loss(&tr).unwrap() - 0.25).abs() < 1e-15);
        let r = net.intrinsic_rewards(&tr, 1.0).unwrap();
        assert_eq!(r, vec![0.0, 0.25]);
    }

    #[test]
    fn short_traces_are_free() {
        let net = generic_net(0);
        let tr = trace(1, 8, 7, 0);
        let pass = net.forward(&tr).unwrap();
        assert_eq!((pass.sp_loss, pass.ap_loss), (0.0, 0.0));
        assert_eq!(pass.intrinsic_rewards(1.0).unwrap(), vec![0.0]);
    }

    #[test]
    fn reward_sum_matches_loss() {
        for seed in 0..5 {
            let net = generic_net(seed);
            let tr = trace(9, 8, 7, seed);
            let pass = net.forward(&tr).unwrap();
            for rho in [0.5, 1.0, 3.0] {
                let r = pass.intrinsic_rewards(rho).unwrap();
                assert_eq!(r[0], 0.0);
                assert!(r.iter().all(|&x| x >= 0.0));
                let total: f64 = r.iter().sum();
                assert!((total - rho * 8.0 * pass.sp_loss).abs() < 1e-10);
            }
            assert!(pass.sp_loss >= 0.0 && pass.ap_loss >= 0.0);
        }
    }

    #[test]
    fn gradients_reach_only_their_groups() {
        let tr = trace(6, 8, 7, 2);
        let mut net = generic_net(1);
        let pass = net.forward(&tr).unwrap();
        net.zero_grads();
        net.backward(&pass, 1.0, 0.0);
        assert_eq!(net.ap.grad_norm_sq(), 0.0);
        assert!(net.sp.grad_norm_sq() > 0.0 && net.phi.grad_norm_sq() > 0.0);
        net.zero_grads();
        net.backward(&pass, 0.0, 1.0);
        assert_eq!(net.sp.grad_norm_sq(), 0.0);
        assert!(net.ap.grad_norm_sq() > 0.0 && net.phi.grad_norm_sq() > 0.0);
    }

    fn check(sp_w: f64, ap_w: f64) {
        for seed in 0..3 {
            let tr = trace(6, 8, 7, seed);
            let mut net = generic_net(seed);
            let pass = net.forward(&tr).unwrap();
            net.zero_grads();
            net.backward(&pass, sp_w, ap_w);
            // The SP target is a constant, so the finite-difference loss
            // freezes phi(s_{t+1}) at the unperturbed parameters.
            let targets: Vec<Vec<f64>> = tr.states.iter().map(|s| net.embed_state(s).unwrap()).collect();
            let loss = |n: &CuriosityNet| {
                let p = n.forward(&tr).unwrap();
                let sp: f64 = p
                    .transitions
                    .iter()
                    .enumerate()
                    .map(|(t, trn)| 0.5 * sq_dist(&trn.sp_pred, &targets[t + 1]))
                    .sum();
                sp_w * sp / p.transitions.len() as f64 + ap_w * p.ap_loss
            };
            let report = grad_check(&mut net, loss, &GradCheckOptions::default());
            assert!(report.max_rel_error <= 1e-4, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn sp_loss_gradient() {
        check(1.0, 0.0);
    }

    #[test]
    fn ap_loss_gradient() {
        check(0.0, 1.0);
    }

    #[test]
    fn combined_gradient() {
        check(0.8, 0.2);
    }
}
