//! Reward shaping: terminal linguistic reward, TD(lambda) returns, the
//! additive advantage `A = Q + V` and the policy-gradient loss.

use crate::corpus::strip_control;
use crate::metrics::{cider_sentence, sentence_bleu, IdfTable};
use crate::policy::{Episode, PolicyNet, RolloutTrace};
use crate::{Error, Result};

/// Default weight on BLEU-4 in the terminal reward.
pub const DEFAULT_BLEU_WEIGHT: f64 = 1.0;
/// Default weight on CIDEr in the terminal reward.
pub const DEFAULT_CIDER_WEIGHT: f64 = 2.0;

/// Per-step reward signals of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTrace {
    pub r_e: Vec<f64>,
    pub r_i: Vec<f64>,
    pub q: Vec<f64>,
    pub advantage: Vec<f64>,
    pub bleu4: f64,
    pub cider: f64,
}

impl RewardTrace {
    /// `A = Q + r_i` with `Q` from [`td_lambda_q`].
    pub fn assemble(extrinsic: Extrinsic, r_i: Vec<f64>, gamma: f64, lambda: f64) -> Result<Self> {
        let q = td_lambda_q(&extrinsic.rewards, gamma, lambda)?;
        let advantage = advantages(&q, &r_i)?;
        Ok(Self {
            r_e: extrinsic.rewards,
            r_i,
            q,
            advantage,
            bleu4: extrinsic.bleu4,
            cider: extrinsic.cider,
        })
    }

    pub fn terminal(&self) -> f64 {
        self.r_e.last().copied().unwrap_or(0.0)
    }

    /// `V = sum_t r^i_t`.
    pub fn intrinsic_value(&self) -> f64 {
        self.r_i.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extrinsic {
    pub rewards: Vec<f64>,
    pub bleu4: f64,
    pub cider: f64,
}

/// Zero everywhere except the last step, which gets `a * BLEU-4 + b * CIDEr`.
///
/// BLEU-4 is sentence level with add-one smoothing; control tokens are
/// stripped from the candidate before scoring. `references` are bodies
/// without control tokens.
pub fn extrinsic_reward(
    candidate: &[usize],
    references: &[Vec<usize>],
    idf: &IdfTable<usize>,
    a: f64,
    b: f64,
) -> Result<Extrinsic> {
    if candidate.is_empty() {
        return Err(Error::InvalidArgument("candidate is empty".into()));
    }
    let body = strip_control(candidate);
    let bleu4 = sentence_bleu(&body, references, 4);
    let cider = cider_sentence(&body, references, idf);
    let mut rewards = vec![0.0; candidate.len()];
    rewards[candidate.len() - 1] = a * bleu4 + b * cider;
    Ok(Extrinsic { rewards, bleu4, cider })
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must lie in [0, 1], got {v}")))
    }
}

/// Lambda-return over truncated j-step returns with no bootstrapping.
///
/// The weights `(1 - lambda) lambda^j` on the partial returns and
/// `lambda^{T-t}` on the full return sum to one, which collapses to
/// `Q_t = r_t + gamma * lambda * Q_{t+1}`. At `lambda = 1` this is the
/// discounted return.
pub fn td_lambda_q(r_e: &[f64], gamma: f64, lambda: f64) -> Result<Vec<f64>> {
    check_unit("gamma", gamma)?;
    check_unit("lambda", lambda)?;
    let mut q = vec![0.0; r_e.len()];
    let mut next = 0.0;
    for t in (0..r_e.len()).rev() {
        next = r_e[t] + gamma * lambda * next;
        q[t] = next;
    }
    Ok(q)
}

/// `Q_t = gamma^{T-t} r` for 1-indexed `t`.
pub fn q_closed_form(r_terminal: f64, len: usize, gamma: f64) -> Result<Vec<f64>> {
    if len == 0 {
        return Err(Error::InvalidArgument("episode length must be at least 1".into()));
    }
    check_unit("gamma", gamma)?;
    Ok((1..=len).map(|t| gamma.powi((len - t) as i32) * r_terminal).collect())
}

/// Elementwise `q + r_i`.
pub fn advantages(q: &[f64], r_i: &[f64]) -> Result<Vec<f64>> {
    if q.len() != r_i.len() {
        return Err(Error::dim("advantages", q.len(), r_i.len()));
    }
    Ok(q.iter().zip(r_i).map(|(a, b)| a + b).collect())
}

/// `-(1/B) sum_b sum_t A_t ln pi(y_t | s_t)`.
pub fn rl_loss(traces: &[&RolloutTrace], advantage: &[Vec<f64>]) -> Result<f64> {
    if traces.len() != advantage.len() {
        return Err(Error::dim("rl_loss batch", traces.len(), advantage.len()));
    }
    if traces.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (tr, adv) in traces.iter().zip(advantage) {
        if tr.len() != adv.len() {
            return Err(Error::dim("rl_loss episode", tr.len(), adv.len()));
        }
        total -= tr.log_probs.iter().zip(adv).map(|(l, a)| l * a).sum::<f64>();
    }
    Ok(total / traces.len() as f64)
}

/// Accumulates the policy gradient of [`rl_loss`] with the advantages frozen.
pub fn rl_backward(policy: &mut PolicyNet, episodes: &[Episode], advantage: &[Vec<f64>]) -> Result<()> {
    if episodes.len() != advantage.len() {
        return Err(Error::dim("rl_backward batch", episodes.len(), advantage.len()));
    }
    let scale = 1.0 / episodes.len().max(1) as f64;
    for (ep, adv) in episodes.iter().zip(advantage) {
        if ep.trace.len() != adv.len() {
            return Err(Error::dim("rl_backward episode", ep.trace.len(), adv.len()));
        }
        let w: Vec<f64> = adv.iter().map(|a| a * scale).collect();
        policy.backward(ep, &w);
    }
    Ok(())
}
