use crate::diffkernel::OptimKind;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Which losses drive training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Policy gradient with curiosity plus discounted imitation.
    #[default]
    Crl,
    /// Teacher-forced cross-entropy only.
    XeOnly,
}

/// Every knob of a training run. Missing keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub t_max: usize,
    /// Hidden size Z of both LSTM layers.
    pub hidden: usize,
    /// Size of the curiosity state embedding.
    pub embed_dim: usize,
    /// Hidden width of the SP-Net and AP-Net.
    pub curiosity_hidden: usize,

    pub objective: Objective,
    /// Epochs of cross-entropy-only training before the main objective.
    pub xe_pretrain_epochs: usize,

    /// Intrinsic reward scale.
    pub rho: f64,
    pub gamma: f64,
    pub lambda: f64,
    /// AP-Net loss weight.
    pub alpha: f64,
    /// SP-Net loss weight.
    pub beta: f64,
    /// Initial imitation weight and its per-epoch decay.
    pub eta0: f64,
    pub delta: f64,
    pub bleu_weight: f64,
    pub cider_weight: f64,

    pub optimizer: OptimKind,
    pub lr: f64,
    pub lr_decay: f64,
    pub lr_period: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip_norm: Option<f64>,

    /// Beam width for validation decoding; 1 is greedy.
    pub beam_width: usize,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vocab: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            epochs: 30,
            batch_size: 16,
            t_max: 80,
            hidden: 64,
            embed_dim: 64,
            curiosity_hidden: 64,
            objective: Objective::Crl,
            xe_pretrain_epochs: 0,
            rho: 1.0,
            gamma: 0.9,
            lambda: 1.0,
            alpha: 0.2,
            beta: 0.8,
            eta0: 1.0,
            delta: 0.9,
            bleu_weight: crate::rewards::DEFAULT_BLEU_WEIGHT,
            cider_weight: crate::rewards::DEFAULT_CIDER_WEIGHT,
            optimizer: OptimKind::Sgd,
            lr: 6e-4,
            lr_decay: 0.8,
            lr_period: 3,
            clip_norm: Some(5.0),
            beam_width: 1,
            train_data: None,
            val_data: None,
            vocab: None,
            checkpoint_dir: None,
            report_path: None,
        }
    }
}

impl TrainConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for (name, v) in [
            ("rho", self.rho),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("eta0", self.eta0),
            ("bleu_weight", self.bleu_weight),
            ("cider_weight", self.cider_weight),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a nonnegative number, got {v}"));
            }
        }
        for (name, v) in [("gamma", self.gamma), ("lambda", self.lambda)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad(format!("delta must lie in (0, 1], got {}", self.delta));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad(format!("lr_decay must lie in (0, 1], got {}", self.lr_decay));
        }
        if let Some(c) = self.clip_norm {
            if c.is_nan() || c <= 0.0 {
                return bad(format!("clip_norm must be positive, got {c}"));
            }
        }
        for (name, v) in [
            ("lr_period", self.lr_period),
            ("batch_size", self.batch_size),
            ("t_max", self.t_max),
            ("hidden", self.hidden),
            ("embed_dim", self.embed_dim),
            ("curiosity_hidden", self.curiosity_hidden),
            ("beam_width", self.beam_width),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        Ok(())
    }

    /// Whether epoch `k` (0-based) trains with cross-entropy alone.
    pub fn xe_only_epoch(&self, k: usize) -> bool {
        self.objective == Objective::XeOnly || k < self.xe_pretrain_epochs
    }
}
