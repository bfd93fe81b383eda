use crate::corpus::{Scene, BOS, EOS};
use crate::diffkernel::{
    init_xavier, matvec, matvec_transposed, softmax, softmax_backward, LstmCache,
    LstmCell, ParamSet, Parameter,
};
use crate::rng::Rng;
use crate::{Error, Result};
use rand::Rng as _;

/// Recurrent weights are drawn from `U(-RECURRENT_INIT, RECURRENT_INIT)`.
pub const RECURRENT_INIT: f64 = 0.08;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    /// Word embedding, `[D, Z]`.
    pub w_e: Parameter,
    /// Feature projection, `[Z, E]`.
    pub w_v: Parameter,
    /// Attention query projection, `[Z, Z]`.
    pub w_h: Parameter,
    /// Attention scoring vector, `[1, Z]`.
    pub w_att: Parameter,
    pub vis: LstmCell,
    pub lang: LstmCell,
    /// Output projection, `[D, Z]`.
    pub w_p: Parameter,
    pub b_p: Parameter,
    vocab: usize,
    hidden: usize,
    feature_dim: usize,
}

/// Recurrent state of both layers.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    pub s_vis: Vec<f64>,
    pub c_vis: Vec<f64>,
    pub s_lang: Vec<f64>,
    pub c_lang: Vec<f64>,
}

impl PolicyState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            s_vis: vec![0.0; hidden],
            c_vis: vec![0.0; hidden],
            s_lang: vec![0.0; hidden],
            c_lang: vec![0.0; hidden],
        }
    }

    /// `s_t = [s_vis, s_lang]`.
    pub fn concat(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(2 * self.s_vis.len());
        s.extend_from_slice(&self.s_vis);
        s.extend_from_slice(&self.s_lang);
        s
    }
}

/// Per-scene quantities that do not change across steps.
#[derive(Debug, Clone)]
pub struct SceneContext {
    regions: Vec<Vec<f64>>,
    mean: Vec<f64>,
    proj_regions: Vec<Vec<f64>>,
    proj_mean: Vec<f64>,
}

impl SceneContext {
    pub fn regions(&self) -> usize {
        self.regions.len()
    }
}

/// A sampled or teacher-forced episode.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutTrace {
    pub actions: Vec<usize>,
    /// `ln pi(y_t | s_t)` for each step.
    pub log_probs: Vec<f64>,
    /// Concatenated state `s_t` that produced `y_t`.
    pub states: Vec<Vec<f64>>,
    pub attention: Vec<Vec<f64>>,
    pub terminated: bool,
}

impl RolloutTrace {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn log_prob(&self) -> f64 {
        self.log_probs.iter().sum()
    }
}

#[derive(Debug, Clone)]
struct StepCache {
    prev_word: usize,
    vis: LstmCache,
    lang: LstmCache,
    s_vis: Vec<f64>,
    s_lang: Vec<f64>,
    att_tanh: Vec<Vec<f64>>,
    attn: Vec<f64>,
    dist: Vec<f64>,
}

/// A trace plus the forward context needed to backpropagate through it.
#[derive(Debug, Clone)]
pub struct Episode {
    pub trace: RolloutTrace,
    ctx: SceneContext,
    caches: Vec<StepCache>,
}

impl Episode {
    /// Output distribution at each step.
    pub fn distributions(&self) -> impl Iterator<Item = &[f64]> {
        self.caches.iter().map(|c| c.dist.as_slice())
    }
}

/// Output of one forward step.
pub(crate) struct StepOut {
    pub dist: Vec<f64>,
    pub state: PolicyState,
    pub v_hat: Vec<f64>,
    pub attn: Vec<f64>,
}

impl PolicyNet {
    /// All-zero parameters.
    pub fn zeros(vocab: usize, hidden: usize, feature_dim: usize) -> Self {
        Self {
            w_e: Parameter::zeros("policy.w_e", &[vocab, hidden]),
            w_v: Parameter::zeros("policy.w_v", &[hidden, feature_dim]),
            w_h: Parameter::zeros("policy.w_h", &[hidden, hidden]),
            w_att: Parameter::zeros("policy.w_att", &[1, hidden]),
            vis: LstmCell::new("policy.vis", 3 * hidden, hidden),
            lang: LstmCell::new("policy.lang", feature_dim + hidden, hidden),
            w_p: Parameter::zeros("policy.w_p", &[vocab, hidden]),
            b_p: Parameter::zeros("policy.b_p", &[vocab]),
            vocab,
            hidden,
            feature_dim,
        }
    }

    pub fn new(vocab: usize, hidden: usize, feature_dim: usize, rng: &mut Rng) -> Self {
        let mut net = Self::zeros(vocab, hidden, feature_dim);
        init_xavier(&mut net.w_e, rng);
        init_xavier(&mut net.w_v, rng);
        init_xavier(&mut net.w_h, rng);
        init_xavier(&mut net.w_att, rng);
        net.vis.init(RECURRENT_INIT, rng);
        net.lang.init(RECURRENT_INIT, rng);
        init_xavier(&mut net.w_p, rng);
        net
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn context(&self, features: &[Vec<f64>]) -> Result<SceneContext> {
        if features.is_empty() {
            return Err(Error::dim("policy context", "at least one region", 0));
        }
        if let Some(bad) = features.iter().find(|r| r.len() != self.feature_dim) {
            return Err(Error::dim("policy context", self.feature_dim, bad.len()));
        }
        let m = features.len() as f64;
        let mut mean = vec![0.0; self.feature_dim];
        for r in features {
            for (a, b) in mean.iter_mut().zip(r) {
                *a += b;
            }
        }
        mean.iter_mut().for_each(|a| *a /= m);
        let (z, e) = (self.hidden, self.feature_dim);
        let wv = self.w_v.value.data();
        Ok(SceneContext {
            proj_regions: features.iter().map(|r| matvec(wv, z, e, r)).collect(),
            proj_mean: matvec(wv, z, e, &mean),
            regions: features.to_vec(),
            mean,
        })
    }

    fn forward_step(&self, ctx: &SceneContext, prev_word: usize, prev: &PolicyState) -> (StepOut, StepCache) {
        let z = self.hidden;
        let mut x_vis = Vec::with_capacity(3 * z);
        x_vis.extend_from_slice(&prev.s_lang);
        x_vis.extend_from_slice(&ctx.proj_mean);
        x_vis.extend_from_slice(self.w_e.value.row(prev_word));
        let (s_vis, c_vis, vis_cache) = self.vis.step(&x_vis, &prev.s_vis, &prev.c_vis);

        let query = matvec(self.w_h.value.data(), z, z, &s_vis);
        let w_att = self.w_att.value.data();
        let att_tanh: Vec<Vec<f64>> = ctx
            .proj_regions
            .iter()
            .map(|p| p.iter().zip(&query).map(|(a, b)| (a + b).tanh()).collect())
            .collect();
        let scores: Vec<f64> = att_tanh
            .iter()
            .map(|t: &Vec<f64>| t.iter().zip(w_att).map(|(a, b)| a * b).sum())
            .collect();
        let attn = softmax(&scores);
        let mut v_hat = vec![0.0; self.feature_dim];
        for (a, r) in attn.iter().zip(&ctx.regions) {
            for (o, x) in v_hat.iter_mut().zip(r) {
                *o += a * x;
            }
        }

        let mut x_lang = Vec::with_capacity(self.feature_dim + z);
        x_lang.extend_from_slice(&v_hat);
        x_lang.extend_from_slice(&s_vis);
        let (s_lang, c_lang, lang_cache) = self.lang.step(&x_lang, &prev.s_lang, &prev.c_lang);

        let mut logits = matvec(self.w_p.value.data(), self.vocab, z, &s_lang);
        for (l, b) in logits.iter_mut().zip(self.b_p.value.data()) {
            *l += b;
        }
        let dist = softmax(&logits);
        let cache = StepCache {
            prev_word,
            vis: vis_cache,
            lang: lang_cache,
            s_vis: s_vis.clone(),
            s_lang: s_lang.clone(),
            att_tanh,
            attn: attn.clone(),
            dist: dist.clone(),
        };
        let out = StepOut {
            dist,
            state: PolicyState {
                s_vis,
                c_vis,
                s_lang,
                c_lang,
            },
            v_hat,
            attn,
        };
        (out, cache)
    }

    /// One policy step: `(pi(.|s_t), s_t, v_hat_t, attention_t)`.
    pub fn policy_step(
        &self,
        ctx: &SceneContext,
        prev_word: usize,
        prev: &PolicyState,
    ) -> Result<(Vec<f64>, PolicyState, Vec<f64>, Vec<f64>)> {
        if prev_word >= self.vocab {
            return Err(Error::IndexOutOfRange {
                index: prev_word,
                size: self.vocab,
            });
        }
        if prev.s_vis.len() != self.hidden || prev.s_lang.len() != self.hidden {
            return Err(Error::dim("policy_step state", self.hidden, prev.s_vis.len()));
        }
        let (out, _) = self.forward_step(ctx, prev_word, prev);
        Ok((out.dist, out.state, out.v_hat, out.attn))
    }

    fn unroll(
        &self,
        ctx: SceneContext,
        t_max: usize,
        mut choose: impl FnMut(usize, &[f64]) -> Option<usize>,
    ) -> Episode {
        let mut state = PolicyState::zeros(self.hidden);
        let mut prev = BOS;
        let mut trace = RolloutTrace {
            actions: Vec::new(),
            log_probs: Vec::new(),
            states: Vec::new(),
            attention: Vec::new(),
            terminated: false,
        };
        let mut caches = Vec::new();
        for t in 0..t_max {
            let (out, cache) = self.forward_step(&ctx, prev, &state);
            let Some(y) = choose(t, &out.dist) else { break };
            state = out.state;
            trace.actions.push(y);
            trace.log_probs.push(out.dist[y].ln());
            trace.states.push(state.concat());
            trace.attention.push(out.attn);
            caches.push(cache);
            prev = y;
            if y == EOS {
                trace.terminated = true;
                break;
            }
        }
        Episode { trace, ctx, caches }
    }

    /// Samples `y_t ~ pi(.|s_t)` by inverse CDF until `<eos>` or `t_max`.
    pub fn rollout_sample(&self, scene: &Scene, t_max: usize, rng: &mut Rng) -> Result<Episode> {
        self.rollout_sample_features(&scene.features, t_max, rng)
    }

    pub fn rollout_sample_features(&self, features: &[Vec<f64>], t_max: usize, rng: &mut Rng) -> Result<Episode> {
        if t_max == 0 {
            return Err(Error::InvalidArgument("t_max must be at least 1".into()));
        }
        let ctx = self.context(features)?;
        Ok(self.unroll(ctx, t_max, |_, dist| Some(sample_index(dist, rng.random::<f64>()))))
    }

    /// Feeds `tokens` as the actions (teacher forcing).
    pub fn teacher_force(&self, features: &[Vec<f64>], tokens: &[usize]) -> Result<Episode> {
        if tokens.is_empty() {
            return Err(Error::InvalidArgument("forced sequence is empty".into()));
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t >= self.vocab) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                size: self.vocab,
            });
        }
        let ctx = self.context(features)?;
        // EOS inside the forced sequence still ends the episode.
        let mut ep = self.unroll(ctx, tokens.len(), |t, _| tokens.get(t).copied());
        ep.trace.terminated = ep.trace.actions.last() == Some(&EOS);
        Ok(ep)
    }

    /// `ln pi(y_{1:T})` under teacher forcing.
    pub fn sequence_log_prob(&self, features: &[Vec<f64>], tokens: &[usize]) -> Result<f64> {
        Ok(self.teacher_force(features, tokens)?.trace.log_prob())
    }

    /// Accumulates the gradient of `-sum_t weights[t] * ln pi(y_t | s_t)`.
    pub fn backward(&mut self, ep: &Episode, weights: &[f64]) {
        assert_eq!(weights.len(), ep.caches.len(), "one weight per step");
        let (z, e, d) = (self.hidden, self.feature_dim, self.vocab);
        let m = ep.ctx.regions.len();
        let mut d_s_vis_next = vec![0.0; z];
        let mut d_c_vis_next = vec![0.0; z];
        let mut d_s_lang_next = vec![0.0; z];
        let mut d_c_lang_next = vec![0.0; z];
        let mut d_proj_regions = vec![vec![0.0; z]; m];
        let mut d_proj_mean = vec![0.0; z];

        for (t, cache) in ep.caches.iter().enumerate().rev() {
            let w = weights[t];
            let y = ep.trace.actions[t];
            let mut dlogits: Vec<f64> = cache.dist.iter().map(|p| w * p).collect();
            dlogits[y] -= w;

            // output layer
            {
                let gw = self.w_p.grad.data_mut();
                for (k, &g) in dlogits.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    for (dst, s) in gw[k * z..(k + 1) * z].iter_mut().zip(&cache.s_lang) {
                        *dst += g * s;
                    }
                }
                for (b, g) in self.b_p.grad.data_mut().iter_mut().zip(&dlogits) {
                    *b += g;
                }
            }
            let mut d_s_lang = matvec_transposed(self.w_p.value.data(), d, z, &dlogits);
            for (a, b) in d_s_lang.iter_mut().zip(&d_s_lang_next) {
                *a += b;
            }

            // language LSTM
            let (dx_lang, dh_lang_prev, dc_lang_prev) = self.lang.backward(&cache.lang, &d_s_lang, &d_c_lang_next);
            let d_vhat = &dx_lang[..e];
            let mut d_s_vis: Vec<f64> = dx_lang[e..].iter().zip(&d_s_vis_next).map(|(a, b)| a + b).collect();

            // attention
            let da: Vec<f64> = ep
                .ctx
                .regions
                .iter()
                .map(|r| r.iter().zip(d_vhat).map(|(a, b)| a * b).sum())
                .collect();
            let de = softmax_backward(&cache.attn, &da);
            let w_att = self.w_att.value.data().to_vec();
            let mut d_query = vec![0.0; z];
            {
                let g_att = self.w_att.grad.data_mut();
                for (i, tanh) in cache.att_tanh.iter().enumerate() {
                    let dei = de[i];
                    for j in 0..z {
                        g_att[j] += dei * tanh[j];
                        let dpre = dei * w_att[j] * (1.0 - tanh[j] * tanh[j]);
                        d_proj_regions[i][j] += dpre;
                        d_query[j] += dpre;
                    }
                }
            }
            {
                let gh = self.w_h.grad.data_mut();
                for (row, &g) in gh.chunks_exact_mut(z).zip(&d_query) {
                    for (dst, s) in row.iter_mut().zip(&cache.s_vis) {
                        *dst += g * s;
                    }
                }
            }
            let dq_back = matvec_transposed(self.w_h.value.data(), z, z, &d_query);
            for (a, b) in d_s_vis.iter_mut().zip(&dq_back) {
                *a += b;
            }

            // visual LSTM
            let (dx_vis, dh_vis_prev, dc_vis_prev) = self.vis.backward(&cache.vis, &d_s_vis, &d_c_vis_next);
            for j in 0..z {
                d_proj_mean[j] += dx_vis[z + j];
            }
            for (dst, g) in self.w_e.grad.row_mut(cache.prev_word).iter_mut().zip(&dx_vis[2 * z..]) {
                *dst += g;
            }
            d_s_lang_next = dh_lang_prev.iter().zip(&dx_vis[..z]).map(|(a, b)| a + b).collect();
            d_c_lang_next = dc_lang_prev;
            d_s_vis_next = dh_vis_prev;
            d_c_vis_next = dc_vis_prev;
        }

        let gv = self.w_v.grad.data_mut();
        for (dp, r) in d_proj_regions.iter().zip(&ep.ctx.regions).chain(std::iter::once((&d_proj_mean, &ep.ctx.mean))) {
            for (row, &g) in gv.chunks_exact_mut(e).zip(dp) {
                if g == 0.0 {
                    continue;
                }
                for (dst, x) in row.iter_mut().zip(r) {
                    *dst += g * x;
                }
            }
        }
    }
}

/// Inverse-CDF sampling with `u` in `[0, 1)`.
pub(crate) fn sample_index(dist: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, &p) in dist.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
        }
        cum += p;
        if cum > u && p > 0.0 {
            return i;
        }
    }
    last_positive
}

impl ParamSet for PolicyNet {
    fn params(&self) -> Vec<&Parameter> {
        let mut v = vec![&self.w_e, &self.w_v, &self.w_h, &self.w_att];
        v.extend(self.vis.params());
        v.extend(self.lang.params());
        v.extend([&self.w_p, &self.b_p]);
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut v = vec![&mut self.w_e, &mut self.w_v, &mut self.w_h, &mut self.w_att];
        v.extend(self.vis.params_mut());
        v.extend(self.lang.params_mut());
        v.extend([&mut self.w_p, &mut self.b_p]);
        v
    }
}

/// Binds a policy to one scene for the decoders.
pub struct PolicyDecoder<'a> {
    net: &'a PolicyNet,
    ctx: SceneContext,
}

impl<'a> PolicyDecoder<'a> {
    pub fn new(net: &'a PolicyNet, features: &[Vec<f64>]) -> Result<Self> {
        Ok(Self {
            ctx: net.context(features)?,
            net,
        })
    }
}

impl super::StepModel for PolicyDecoder<'_> {
    type State = PolicyState;

    fn vocab_size(&self) -> usize {
        self.net.vocab
    }

    fn initial(&self) -> PolicyState {
        PolicyState::zeros(self.net.hidden)
    }

    fn next(&self, state: &PolicyState, prev: usize) -> (Vec<f64>, PolicyState) {
        let (out, _) = self.net.forward_step(&self.ctx, prev, state);
        (out.dist.iter().map(|p| p.ln()).collect(), out.state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn features(m: usize, e: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut r = rng::stream(seed, 99);
        (0..m).map(|_| (0..e).map(|_| r.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn single_region_attention_is_identity() {
        let net = PolicyNet::new(7, 5, 4, &mut rng::stream(1, 1));
        let f = features(1, 4, 3);
        let ctx = net.context(&f).unwrap();
        let (_, _, v_hat, attn) = net.policy_step(&ctx, BOS, &PolicyState::zeros(5)).unwrap();
        assert_eq!(attn, vec![1.0]);
        assert_eq!(v_hat, f[0]);
    }

    #[test]
    fn zero_params_give_uniform() {
        let net = PolicyNet::zeros(6, 4, 3);
        let ctx = net.context(&features(2, 3, 0)).unwrap();
        let (dist, ..) = net.policy_step(&ctx, BOS, &PolicyState::zeros(4)).unwrap();
        assert!(dist.iter().all(|&p| (p - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn step_rejects_bad_word() {
        let net = PolicyNet::zeros(6, 4, 3);
        let ctx = net.context(&features(2, 3, 0)).unwrap();
        assert!(net.policy_step(&ctx, 6, &PolicyState::zeros(4)).is_err());
        assert!(net.context(&features(2, 5, 0)).is_err());
    }

    #[test]
    fn trace_invariants() {
        let net = PolicyNet::new(9, 6, 5, &mut rng::stream(2, 1));
        let f = features(4, 5, 1);
        let ep = net.rollout_sample_features(&f, 12, &mut rng::stream(5, 5)).unwrap();
        let tr = &ep.trace;
        assert!(tr.len() <= 12 && !tr.is_empty());
        assert_eq!(tr.log_probs.len(), tr.len());
        assert_eq!(tr.states.len(), tr.len());
        assert_eq!(tr.attention.len(), tr.len());
        for a in &tr.attention {
            assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(a.iter().all(|&x| x >= 0.0));
        }
        for d in ep.distributions() {
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert_eq!(tr.terminated, tr.actions.last() == Some(&EOS));
        assert!(tr.actions[..tr.len() - 1].iter().all(|&y| y != EOS));
    }

    #[test]
    fn concat_matches_layers() {
        let net = PolicyNet::new(9, 6, 5, &mut rng::stream(2, 1));
        let f = features(3, 5, 1);
        let ctx = net.context(&f).unwrap();
        let mut st = PolicyState::zeros(6);
        for w in [BOS, 4, 5] {
            let (_, next, ..) = net.policy_step(&ctx, w, &st).unwrap();
            let c = next.concat();
            assert_eq!(&c[..6], next.s_vis.as_slice());
            assert_eq!(&c[6..], next.s_lang.as_slice());
            st = next;
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let net = PolicyNet::new(9, 6, 5, &mut rng::stream(2, 1));
        let f = features(3, 5, 1);
        let a = net.rollout_sample_features(&f, 20, &mut rng::stream(3, 0)).unwrap().trace;
        let b = net.rollout_sample_features(&f, 20, &mut rng::stream(3, 0)).unwrap().trace;
        assert_eq!(a, b);
    }

    #[test]
    fn one_hot_policy_ignores_seed() {
        let mut net = PolicyNet::zeros(6, 4, 3);
        net.b_p.value.data_mut()[4] = 1e4; // all mass on token 4
        let f = features(2, 3, 0);
        let a = net.rollout_sample_features(&f, 5, &mut rng::stream(1, 0)).unwrap().trace;
        let b = net.rollout_sample_features(&f, 5, &mut rng::stream(2, 0)).unwrap().trace;
        assert_eq!(a.actions, vec![4; 5]);
        assert_eq!(a.actions, b.actions);
        assert!(!a.terminated);
    }

    #[test]
    fn sequence_log_prob_matches_trace() {
        let net = PolicyNet::new(9, 6, 5, &mut rng::stream(4, 1));
        let f = features(3, 5, 2);
        let ep = net.rollout_sample_features(&f, 15, &mut rng::stream(9, 0)).unwrap();
        let lp = net.sequence_log_prob(&f, &ep.trace.actions).unwrap();
        assert!((lp - ep.trace.log_prob()).abs() < 1e-12);
        assert!(lp.exp() <= 1.0);
        let one = net.sequence_log_prob(&f, &[5]).unwrap();
        let ctx = net.context(&f).unwrap();
        let (dist, ..) = net.policy_step(&ctx, BOS, &PolicyState::zeros(6)).unwrap();
        assert!((one - dist[5].ln()).abs() < 1e-15);
        assert!(net.sequence_log_prob(&f, &[]).is_err());
    }

    #[test]
    fn inverse_cdf() {
        let d = [0.0, 0.25, 0.0, 0.75];
        assert_eq!(sample_index(&d, 0.0), 1);
        assert_eq!(sample_index(&d, 0.2499), 1);
        assert_eq!(sample_index(&d, 0.25), 3);
        assert_eq!(sample_index(&d, 0.999999), 3);
    }

    #[test]
    fn backward_matches_finite_differences() {
        use crate::diffkernel::{grad_check, init_uniform, GradCheckOptions};
        let tokens = [5, 6, 4, 7, EOS];
        let weights = [0.7, -1.3, 0.4, 2.0, 0.9];
        for seed in 0..4 {
            // A generic point: at the small init the recurrent gradients sit
            // below the finite-difference noise floor.
            let mut net = PolicyNet::zeros(8, 5, 4);
            let mut r = rng::stream(seed, 1);
            for p in net.params_mut() {
                init_uniform(p, 0.5, &mut r);
            }
            let f = features(3, 4, seed);
            let loss = |n: &PolicyNet| -> f64 {
                let ep = n.teacher_force(&f, &tokens).unwrap();
                -ep.trace.log_probs.iter().zip(&weights).map(|(l, w)| l * w).sum::<f64>()
            };
            net.zero_grads();
            let ep = net.teacher_force(&f, &tokens).unwrap();
            net.backward(&ep, &weights);
            let report = grad_check(&mut net, loss, &GradCheckOptions::default());
            assert!(report.max_rel_error <= 1e-4, "seed {seed}: {report:?}");
            assert!(report.checked > 300);
        }
    }
}
