//! Group-relative advantages and the clipped surrogate objective.
//!
//! GRPO standardizes each reward against its group (population mean and
//! standard deviation) and averages the per-token surrogate over each
//! completion's length. DR.GRPO keeps only the mean subtraction and sums
//! over tokens. No KL penalty is applied.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::sim::ToyPolicy;

/// Group standard deviations below this produce all-zero GRPO advantages.
pub const DEFAULT_STD_FLOOR: f64 = 1e-8;
pub const DEFAULT_CLIP_EPSILON: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdvantageMode {
    #[default]
    Grpo,
    DrGrpo,
}

impl fmt::Display for AdvantageMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdvantageMode::Grpo => "grpo",
            AdvantageMode::DrGrpo => "drgrpo",
        })
    }
}

impl FromStr for AdvantageMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_', '.'], "").as_str() {
            "grpo" => Ok(AdvantageMode::Grpo),
            "drgrpo" => Ok(AdvantageMode::DrGrpo),
            other => Err(invalid("mode", format!("unknown advantage mode `{other}`"))),
        }
    }
}

/// Per-completion advantages; constant across the tokens of a completion.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageVector {
    pub values: Vec<f64>,
    pub mode: AdvantageMode,
}

/// Clip radius and normalization mode of the surrogate objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipConfig {
    pub epsilon: f64,
    pub mode: AdvantageMode,
    pub std_floor: f64,
}

impl ClipConfig {
    pub fn new(epsilon: f64, mode: AdvantageMode) -> Result<Self> {
        let config = Self {
            epsilon,
            mode,
            std_floor: DEFAULT_STD_FLOOR,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid(
                "clip_epsilon",
                format!("{} not in (0, 1)", self.epsilon),
            ));
        }
        if !(self.std_floor >= 0.0 && self.std_floor.is_finite()) {
            return Err(invalid(
                "std_floor",
                format!("{} must be >= 0", self.std_floor),
            ));
        }
        Ok(())
    }
}

impl Default for ClipConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_CLIP_EPSILON,
            mode: AdvantageMode::Grpo,
            std_floor: DEFAULT_STD_FLOOR,
        }
    }
}

pub fn group_advantages(rewards: &[f64], mode: AdvantageMode) -> AdvantageVector {
    group_advantages_with_floor(rewards, mode, DEFAULT_STD_FLOOR)
}

pub fn group_advantages_with_floor(
    rewards: &[f64],
    mode: AdvantageMode,
    std_floor: f64,
) -> AdvantageVector {
    let n = rewards.len();
    let constant = rewards.windows(2).all(|w| w[0] == w[1]);
    if n == 0 || constant {
        return AdvantageVector {
            values: vec![0.0; n],
            mode,
        };
    }
    let mean = rewards.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = rewards.iter().map(|r| r - mean).collect();
    let values = match mode {
        AdvantageMode::DrGrpo => centered,
        AdvantageMode::Grpo => {
            let std = (centered.iter().map(|c| c * c).sum::<f64>() / n as f64).sqrt();
            if std < std_floor {
                vec![0.0; n]
            } else {
                centered.into_iter().map(|c| c / std).collect()
            }
        }
    };
    AdvantageVector { values, mode }
}

/// `min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, config: &ClipConfig) -> Result<f64> {
    let (value, _) = surrogate_term(ratio, advantage, config.epsilon)?;
    Ok(value)
}

/// Surrogate value and its derivative with respect to the ratio.
fn surrogate_term(ratio: f64, advantage: f64, epsilon: f64) -> Result<(f64, f64)> {
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::NonPositiveRatio(ratio));
    }
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * advantage;
    if unclipped <= clipped {
        Ok((unclipped, advantage))
    } else {
        Ok((clipped, 0.0))
    }
}

/// A sampled trajectory with the behaviour-policy probabilities of its tokens
/// and the advantage of the completion it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTrajectory {
    pub tokens: Vec<usize>,
    pub old_token_probs: Option<Vec<f64>>,
    pub advantage: f64,
}

fn old_probs(index: usize, traj: &ScoredTrajectory) -> Result<&[f64]> {
    match &traj.old_token_probs {
        Some(p) if p.len() == traj.tokens.len() => Ok(p),
        _ => Err(Error::StaleSnapshot(index)),
    }
}

fn length_weight(mode: AdvantageMode, len: usize) -> f64 {
    match mode {
        AdvantageMode::Grpo => 1.0 / len as f64,
        AdvantageMode::DrGrpo => 1.0,
    }
}

/// Clipped surrogate averaged over the batch, with per-completion length
/// normalization in GRPO mode.
pub fn surrogate_objective(
    policy: &ToyPolicy,
    batch: &[ScoredTrajectory],
    config: &ClipConfig,
) -> Result<f64> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (i, traj) in batch.iter().enumerate() {
        let old = old_probs(i, traj)?;
        let new = policy.token_probs(&traj.tokens)?;
        let w = length_weight(config.mode, traj.tokens.len());
        for (p, q) in new.iter().zip(old) {
            total += w * surrogate_term(p / q, traj.advantage, config.epsilon)?.0;
        }
    }
    Ok(total / batch.len() as f64)
}

/// Analytic gradient of [`surrogate_objective`] with respect to the policy
/// logits.
pub fn surrogate_gradient(
    policy: &ToyPolicy,
    batch: &[ScoredTrajectory],
    config: &ClipConfig,
) -> Result<Vec<f64>> {
    let vocab = policy.vocab_size();
    let mut grad = vec![0.0; policy.logits().len()];
    if batch.is_empty() {
        return Ok(grad);
    }
    let scale = 1.0 / batch.len() as f64;
    let inv_temp = 1.0 / policy.temperature();
    for (i, traj) in batch.iter().enumerate() {
        let old = old_probs(i, traj)?;
        policy.check_trajectory(&traj.tokens)?;
        let w = scale * length_weight(config.mode, traj.tokens.len());
        for (t, &token) in traj.tokens.iter().enumerate() {
            let state = policy.state_index(&traj.tokens[..t]);
            let probs = policy.state_probs(state);
            let ratio = probs[token] / old[t];
            let (_, d_ratio) = surrogate_term(ratio, traj.advantage, config.epsilon)?;
            if d_ratio == 0.0 {
                continue;
            }
            // d ratio / d logit_k = ratio * (1[k = token] - p_k) / T
            let coef = w * d_ratio * ratio * inv_temp;
            let row = &mut grad[state * vocab..(state + 1) * vocab];
            for (k, (g, p)) in row.iter_mut().zip(&probs).enumerate() {
                let indicator = if k == token { 1.0 } else { 0.0 };
                *g += coef * (indicator - p);
            }
        }
    }
    Ok(grad)
}

/// One gradient-ascent step on the surrogate objective.
pub fn policy_gradient_step(
    policy: &ToyPolicy,
    batch: &[ScoredTrajectory],
    config: &ClipConfig,
    learning_rate: f64,
) -> Result<ToyPolicy> {
    config.validate()?;
    if !learning_rate.is_finite() {
        return Err(invalid("learning_rate", "must be finite"));
    }
    let grad = surrogate_gradient(policy, batch, config)?;
    let mut next = policy.clone();
    for (l, g) in next.logits_mut().iter_mut().zip(grad) {
        *l += learning_rate * g;
    }
    Ok(next)
}
