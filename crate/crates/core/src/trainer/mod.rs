//! Training loop: rollouts, shaped rewards, the combined objective
//! `L_RL + alpha L_AP + beta L_SP + eta L_XE`, schedules, evaluation and
//! checkpoints.

mod config;
mod evaluate;

pub use config::{Objective, TrainConfig};
pub use evaluate::{decode, evaluate, score_candidates, DecodeMode, EvalReport, Evaluation};

use crate::corpus::{Scene, Vocabulary};
use crate::curiosity::CuriosityNet;
use crate::diffkernel::{read_checkpoint, write_checkpoint, Checkpoint, OptimState, ParamSet, Tensor};
use crate::metrics::{build_idf, IdfTable};
use crate::policy::PolicyNet;
use crate::rewards::{extrinsic_reward, RewardTrace};
use crate::rng::{self, streams, Rng};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Checkpoint subdirectory holding the latest epoch.
pub const LAST_CHECKPOINT: &str = "last";
/// Checkpoint subdirectory holding the epoch with the best validation CIDEr.
pub const BEST_CHECKPOINT: &str = "best";
const CONFIG_FILE: &str = "config.toml";

/// `eta0 * delta^k`.
pub fn eta_schedule(eta0: f64, delta: f64, k: usize) -> f64 {
    eta0 * delta.powi(k as i32)
}

/// `mu0 * factor^floor(k / period)`.
pub fn lr_schedule(mu0: f64, factor: f64, period: usize, k: usize) -> Result<f64> {
    if period == 0 {
        return Err(Error::InvalidArgument("lr period must be at least 1".into()));
    }
    Ok(mu0 * factor.powi((k / period) as i32))
}

/// Teacher-forced negative log-likelihood of `reference`, summed over steps.
pub fn xe_loss(policy: &PolicyNet, features: &[Vec<f64>], reference: &[usize]) -> Result<f64> {
    Ok(-policy.sequence_log_prob(features, reference)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub policy: PolicyNet,
    pub curiosity: CuriosityNet,
}

impl Model {
    pub fn new(cfg: &TrainConfig, vocab: usize, feature_dim: usize) -> Self {
        let policy = PolicyNet::new(vocab, cfg.hidden, feature_dim, &mut rng::stream(cfg.seed, streams::INIT_POLICY));
        let curiosity = CuriosityNet::new(
            2 * cfg.hidden,
            cfg.embed_dim,
            cfg.curiosity_hidden,
            vocab,
            &mut rng::stream(cfg.seed, streams::INIT_CURIOSITY),
        );
        Self { policy, curiosity }
    }

    fn zero_grads(&mut self) {
        self.policy.zero_grads();
        self.curiosity.zero_grads();
    }

    /// Reads the weights from a trainer checkpoint directory.
    pub fn load(dir: &Path) -> Result<(Self, TrainConfig)> {
        let ckpt = read_checkpoint(dir)?;
        let cfg = read_config(dir)?;
        let model = Self::from_checkpoint(&ckpt, &cfg)?;
        Ok((model, cfg))
    }

    fn from_checkpoint(ckpt: &Checkpoint, cfg: &TrainConfig) -> Result<Self> {
        let vocab: usize = meta_parse(ckpt, "vocab_size")?;
        let feature_dim: usize = meta_parse(ckpt, "feature_dim")?;
        let mut model = Self {
            policy: PolicyNet::zeros(vocab, cfg.hidden, feature_dim),
            curiosity: CuriosityNet::zeros(2 * cfg.hidden, cfg.embed_dim, cfg.curiosity_hidden, vocab),
        };
        ckpt.load_params(model.policy.params_mut())?;
        ckpt.load_params(model.curiosity.params_mut())?;
        Ok(model)
    }
}

/// One optimizer per parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizers {
    pub policy: OptimState,
    pub phi: OptimState,
    pub sp: OptimState,
    pub ap: OptimState,
}

impl Optimizers {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        let make = || OptimState::new(cfg.optimizer, cfg.lr, cfg.clip_norm);
        Ok(Self {
            policy: make()?,
            phi: make()?,
            sp: make()?,
            ap: make()?,
        })
    }

    pub fn set_lr(&mut self, lr: f64) -> Result<()> {
        for o in self.groups_mut() {
            o.1.set_lr(lr)?;
        }
        Ok(())
    }

    fn groups_mut(&mut self) -> [(&'static str, &mut OptimState); 4] {
        [
            ("policy", &mut self.policy),
            ("phi", &mut self.phi),
            ("sp", &mut self.sp),
            ("ap", &mut self.ap),
        ]
    }

    fn groups(&self) -> [(&'static str, &OptimState); 4] {
        [("policy", &self.policy), ("phi", &self.phi), ("sp", &self.sp), ("ap", &self.ap)]
    }
}

/// Sums over the episodes of one step; divide by `episodes` for means.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepStats {
    pub episodes: usize,
    pub rl_loss: f64,
    pub sp_loss: f64,
    pub ap_loss: f64,
    pub xe_loss: f64,
    /// Sum of `r^i_t` over every sampled step.
    pub intrinsic: f64,
    pub sampled_steps: usize,
    /// Sum of terminal extrinsic rewards.
    pub extrinsic: f64,
}

impl StepStats {
    fn add(&mut self, o: &StepStats) {
        self.episodes += o.episodes;
        self.rl_loss += o.rl_loss;
        self.sp_loss += o.sp_loss;
        self.ap_loss += o.ap_loss;
        self.xe_loss += o.xe_loss;
        self.intrinsic += o.intrinsic;
        self.sampled_steps += o.sampled_steps;
        self.extrinsic += o.extrinsic;
    }
}

/// Knobs that change between steps.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub eta: f64,
    pub xe_only: bool,
    pub idf: &'a IdfTable<usize>,
    pub epoch: usize,
    pub step: usize,
}

/// One update on `batch`.
///
/// Each scene gets a sampled rollout for the policy-gradient and curiosity
/// terms and a teacher-forced pass over one of its references, drawn from
/// `rng` before any rollout. Every parameter group then takes the gradient
/// of the combined loss. Curiosity gradients stop at the policy states, so
/// the policy sees `L_RL + eta L_XE` and the embedding sees
/// `alpha L_AP + beta L_SP`.
pub fn train_step(
    model: &mut Model,
    opt: &mut Optimizers,
    batch: &[&Scene],
    cfg: &TrainConfig,
    ctx: StepContext<'_>,
    rng: &mut Rng,
) -> Result<StepStats> {
    if batch.is_empty() {
        return Ok(StepStats::default());
    }
    let refs: Vec<&[usize]> = batch
        .iter()
        .map(|s| {
            if s.references.is_empty() {
                return Err(Error::Dataset(format!("scene {} has no reference", s.id)));
            }
            Ok(s.references[rng.random_range(0..s.references.len())].as_slice())
        })
        .collect::<Result<_>>()?;

    model.zero_grads();
    let inv_b = 1.0 / batch.len() as f64;
    let mut stats = StepStats {
        episodes: batch.len(),
        ..StepStats::default()
    };
    let non_finite = |term| Error::NonFinite {
        term,
        epoch: ctx.epoch,
        step: ctx.step,
    };

    if !ctx.xe_only {
        for scene in batch {
            let ep = model.policy.rollout_sample(scene, cfg.t_max, rng)?;
            let pass = model.curiosity.forward(&ep.trace)?;
            let r_i = pass.intrinsic_rewards(cfg.rho)?;
            let ex = extrinsic_reward(
                &ep.trace.actions,
                &scene.reference_bodies(),
                ctx.idf,
                cfg.bleu_weight,
                cfg.cider_weight,
            )?;
            let rt = RewardTrace::assemble(ex, r_i, cfg.gamma, cfg.lambda)?;
            stats.rl_loss -= ep.trace.log_probs.iter().zip(&rt.advantage).map(|(l, a)| l * a).sum::<f64>();
            stats.sp_loss += pass.sp_loss;
            stats.ap_loss += pass.ap_loss;
            stats.intrinsic += rt.intrinsic_value();
            stats.sampled_steps += ep.trace.len();
            stats.extrinsic += rt.terminal();
            let w: Vec<f64> = rt.advantage.iter().map(|a| a * inv_b).collect();
            model.policy.backward(&ep, &w);
            model.curiosity.backward(&pass, cfg.beta * inv_b, cfg.alpha * inv_b);
        }
    }

    for (scene, reference) in batch.iter().zip(&refs) {
        let ep = model.policy.teacher_force(&scene.features, reference)?;
        stats.xe_loss -= ep.trace.log_prob();
        if ctx.eta != 0.0 {
            model.policy.backward(&ep, &vec![ctx.eta * inv_b; ep.trace.len()]);
        }
    }

    // Upstream terms first: a bad intrinsic reward also poisons the RL loss.
    for (term, v) in [
        ("sp", stats.sp_loss),
        ("ap", stats.ap_loss),
        ("intrinsic reward", stats.intrinsic),
        ("rl", stats.rl_loss),
        ("xe", stats.xe_loss),
    ] {
        if !v.is_finite() {
            return Err(non_finite(term));
        }
    }
    if model.policy.grad_norm_sq().is_nan() {
        return Err(non_finite("policy gradient"));
    }

    opt.policy.step(&mut model.policy.params_mut());
    if !ctx.xe_only {
        opt.phi.step(&mut model.curiosity.phi.params_mut());
        opt.sp.step(&mut model.curiosity.sp.params_mut());
        opt.ap.step(&mut model.curiosity.ap.params_mut());
    }
    model.zero_grads();
    Ok(stats)
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    pub eta: f64,
    pub lr: f64,
    pub loss_rl: f64,
    pub loss_sp: f64,
    pub loss_ap: f64,
    pub loss_xe: f64,
    /// Mean `r^i_t` over sampled steps.
    pub mean_intrinsic: f64,
    /// Mean terminal reward over sampled episodes.
    pub mean_extrinsic: f64,
    #[serde(flatten)]
    pub val: EvalReport,
}

impl EpochReport {
    fn check_finite(&self) -> Result<()> {
        let fields = [
            ("eta", self.eta),
            ("lr", self.lr),
            ("rl", self.loss_rl),
            ("sp", self.loss_sp),
            ("ap", self.loss_ap),
            ("xe", self.loss_xe),
            ("intrinsic reward", self.mean_intrinsic),
            ("extrinsic reward", self.mean_extrinsic),
        ];
        for (term, v) in fields.into_iter().chain(self.val.values()) {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    term,
                    epoch: self.epoch,
                    step: 0,
                });
            }
        }
        Ok(())
    }
}

/// A training run over fixed train and validation splits.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub model: Model,
    pub opt: Optimizers,
    vocab: Vocabulary,
    idf: IdfTable<usize>,
    feature_dim: usize,
    epochs_done: usize,
    best_cider: Option<f64>,
}

impl Trainer {
    pub fn new(config: TrainConfig, vocab: Vocabulary, train: &[Scene]) -> Result<Self> {
        config.validate()?;
        let feature_dim = train
            .first()
            .map(Scene::feature_dim)
            .ok_or_else(|| Error::Dataset("training split is empty".into()))?;
        let model = Model::new(&config, vocab.len(), feature_dim);
        let opt = Optimizers::new(&config)?;
        // Reward CIDEr uses document frequencies over the training references.
        let idf = build_idf(&train.iter().map(Scene::reference_bodies).collect::<Vec<_>>());
        Ok(Self {
            config,
            model,
            opt,
            vocab,
            idf,
            feature_dim,
            epochs_done: 0,
            best_cider: None,
        })
    }

    /// Restores weights, optimizer moments and the epoch counter from `dir`.
    pub fn resume(dir: &Path, config: TrainConfig, vocab: Vocabulary, train: &[Scene]) -> Result<Self> {
        let mut t = Self::new(config, vocab, train)?;
        let ckpt = read_checkpoint(dir)?;
        let vocab_size: usize = meta_parse(&ckpt, "vocab_size")?;
        if vocab_size != t.vocab.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint vocabulary has {vocab_size} tokens, current has {}",
                t.vocab.len()
            )));
        }
        t.model = Model::from_checkpoint(&ckpt, &t.config)?;
        t.epochs_done = meta_parse(&ckpt, "epoch")?;
        t.best_cider = ckpt.meta("best_cider").map(|v| v.parse()).transpose().map_err(|_| {
            Error::Checkpoint("invalid meta best_cider".into())
        })?;
        for (name, o) in t.opt.groups_mut() {
            let steps: u64 = meta_parse(&ckpt, &format!("optim.{name}.steps"))?;
            let mut first = Vec::new();
            let mut second = Vec::new();
            for i in 0.. {
                let (Some(m), Some(v)) = (
                    ckpt.tensor(&format!("optim.{name}.m.{i}")),
                    ckpt.tensor(&format!("optim.{name}.v.{i}")),
                ) else {
                    break;
                };
                first.push(m.data().to_vec());
                second.push(v.data().to_vec());
            }
            o.restore_moments(steps, first, second);
        }
        Ok(t)
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    pub fn best_cider(&self) -> Option<f64> {
        self.best_cider
    }

    /// Trains epoch `epochs_done + 1` and evaluates on `val`.
    pub fn train_epoch(&mut self, train: &[Scene], val: &[Scene]) -> Result<EpochReport> {
        let k = self.epochs_done;
        let cfg = self.config.clone();
        let eta = eta_schedule(cfg.eta0, cfg.delta, k);
        let lr = lr_schedule(cfg.lr, cfg.lr_decay, cfg.lr_period, k)?;
        self.opt.set_lr(lr)?;
        let xe_only = cfg.xe_only_epoch(k);

        let mut rng = rng::stream(cfg.seed, streams::EPOCH_BASE + k as u64);
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng);

        let mut total = StepStats::default();
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Scene> = chunk.iter().map(|&i| &train[i]).collect();
            let ctx = StepContext {
                eta,
                xe_only,
                idf: &self.idf,
                epoch: k + 1,
                step,
            };
            let s = train_step(&mut self.model, &mut self.opt, &batch, &cfg, ctx, &mut rng)?;
            total.add(&s);
        }

        let eval = self.evaluate(val, DecodeMode::from_width(cfg.beam_width))?;
        let n = total.episodes.max(1) as f64;
        let report = EpochReport {
            epoch: k + 1,
            eta,
            lr,
            loss_rl: total.rl_loss / n,
            loss_sp: total.sp_loss / n,
            loss_ap: total.ap_loss / n,
            loss_xe: total.xe_loss / n,
            mean_intrinsic: total.intrinsic / total.sampled_steps.max(1) as f64,
            mean_extrinsic: if xe_only { 0.0 } else { total.extrinsic / n },
            val: eval.report,
        };
        report.check_finite()?;
        self.epochs_done += 1;
        Ok(report)
    }

    /// Runs until `config.epochs` epochs are done, checkpointing after each
    /// one when `config.checkpoint_dir` is set.
    pub fn run(
        &mut self,
        train: &[Scene],
        val: &[Scene],
        mut on_report: impl FnMut(&EpochReport) -> Result<()>,
    ) -> Result<Vec<EpochReport>> {
        let mut reports = Vec::new();
        while self.epochs_done < self.config.epochs {
            let report = self.train_epoch(train, val)?;
            let improved = self.best_cider.is_none_or(|b| report.val.cider > b);
            if improved {
                self.best_cider = Some(report.val.cider);
            }
            if let Some(dir) = self.config.checkpoint_dir.clone() {
                self.save(&dir.join(LAST_CHECKPOINT))?;
                if improved {
                    self.save(&dir.join(BEST_CHECKPOINT))?;
                }
            }
            on_report(&report)?;
            reports.push(report);
        }
        Ok(reports)
    }

    pub fn evaluate(&self, scenes: &[Scene], mode: DecodeMode) -> Result<Evaluation> {
        evaluate(&self.model.policy, scenes, &self.vocab, mode, self.config.t_max)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::new();
        ckpt.set_meta("epoch", self.epochs_done);
        ckpt.set_meta("vocab_size", self.vocab.len());
        ckpt.set_meta("feature_dim", self.feature_dim);
        if let Some(b) = self.best_cider {
            ckpt.set_meta("best_cider", format!("{b:?}"));
        }
        ckpt.push_params(self.model.policy.params());
        ckpt.push_params(self.model.curiosity.params());
        for (name, o) in self.opt.groups() {
            let (steps, first, second) = o.moments();
            ckpt.set_meta(&format!("optim.{name}.steps"), steps);
            for (i, (m, v)) in first.iter().zip(second).enumerate() {
                ckpt.push(format!("optim.{name}.m.{i}"), Tensor::vector(m.clone()));
                ckpt.push(format!("optim.{name}.v.{i}"), Tensor::vector(v.clone()));
            }
        }
        ckpt
    }

    /// Writes the checkpoint, the effective config and the vocabulary.
    pub fn save(&self, dir: &Path) -> Result<()> {
        write_checkpoint(dir, &self.checkpoint())?;
        let path = dir.join(CONFIG_FILE);
        std::fs::write(&path, self.config.to_toml_string()).map_err(|e| Error::io(&path, e))?;
        self.vocab.save(&dir.join("vocab.txt"))
    }
}

fn meta_parse<T: std::str::FromStr>(ckpt: &Checkpoint, key: &str) -> Result<T> {
    ckpt.meta(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Checkpoint(format!("missing or invalid meta {key}")))
}

fn read_config(dir: &Path) -> Result<TrainConfig> {
    let path = dir.join(CONFIG_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    TrainConfig::from_toml_str(&text)
}

/// Trains from scratch for `config.epochs` epochs.
pub fn train(config: TrainConfig, vocab: Vocabulary, train: &[Scene], val: &[Scene]) -> Result<(Model, Vec<EpochReport>)> {
    let mut t = Trainer::new(config, vocab, train)?;
    let reports = t.run(train, val, |_| Ok(()))?;
    Ok((t.model, reports))
}
