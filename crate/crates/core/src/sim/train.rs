use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adjust::{adjust_group, DEFAULT_EPSILON};
use crate::advantage::{
    group_advantages_with_floor, policy_gradient_step, AdvantageMode, ClipConfig, ScoredTrajectory,
    DEFAULT_CLIP_EPSILON, DEFAULT_STD_FLOOR,
};
use crate::error::{invalid, Error, Result};
use crate::group::{validate_group, CompletionGroup};
use crate::sim::{mix_seed, ToyEnvironment, ToyPolicy};
use crate::smi::SmiKind;

const TRAIN_SALT: u64 = 0x7261_696e;
const EVAL_SALT: u64 = 0x6576_616c;

/// Training variants: advantage normalization, with or without
/// diversity-aware reward adjustment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Grpo,
    DrGrpo,
    DraGrpo,
    DraDrGrpo,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Grpo,
        Algorithm::DrGrpo,
        Algorithm::DraGrpo,
        Algorithm::DraDrGrpo,
    ];

    pub fn advantage_mode(self) -> AdvantageMode {
        match self {
            Algorithm::Grpo | Algorithm::DraGrpo => AdvantageMode::Grpo,
            Algorithm::DrGrpo | Algorithm::DraDrGrpo => AdvantageMode::DrGrpo,
        }
    }

    pub fn adjusts_rewards(self) -> bool {
        matches!(self, Algorithm::DraGrpo | Algorithm::DraDrGrpo)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Grpo => "grpo",
            Algorithm::DrGrpo => "drgrpo",
            Algorithm::DraGrpo => "dra_grpo",
            Algorithm::DraDrGrpo => "dra_drgrpo",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '.', '_'], "").as_str() {
            "grpo" => Ok(Algorithm::Grpo),
            "drgrpo" => Ok(Algorithm::DrGrpo),
            "dragrpo" => Ok(Algorithm::DraGrpo),
            "dradrgrpo" => Ok(Algorithm::DraDrGrpo),
            other => Err(invalid("algorithm", format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub smi: SmiKind,
    pub epsilon: f64,
    pub group_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub clip_epsilon: f64,
    pub seed: u64,
    pub temperature: f64,
    pub eval_interval: usize,
    pub eval_batch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Grpo,
            smi: SmiKind::GraphCut,
            epsilon: DEFAULT_EPSILON,
            group_size: 6,
            steps: 500,
            learning_rate: 1.0,
            clip_epsilon: DEFAULT_CLIP_EPSILON,
            seed: 0,
            temperature: 1.0,
            eval_interval: 10,
            eval_batch: 256,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.smi.validate()?;
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(invalid("epsilon", "must be finite and >= 0"));
        }
        if self.group_size < 2 {
            return Err(invalid("group_size", "must be at least 2"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(invalid("learning_rate", "must be finite and >= 0"));
        }
        self.clip_config()?;
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(invalid("temperature", "must be > 0"));
        }
        if self.eval_interval == 0 {
            return Err(invalid("eval_interval", "must be at least 1"));
        }
        if self.eval_batch == 0 {
            return Err(invalid("eval_batch", "must be at least 1"));
        }
        Ok(())
    }

    pub fn clip_config(&self) -> Result<ClipConfig> {
        ClipConfig::new(self.clip_epsilon, self.algorithm.advantage_mode())
    }
}

/// A group sampled from the behaviour policy, with the per-token
/// probabilities needed for importance ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGroup {
    pub group: CompletionGroup,
    pub trajectories: Vec<Vec<usize>>,
    pub old_token_probs: Vec<Vec<f64>>,
}

impl SampledGroup {
    /// Pairs each trajectory with its snapshot probabilities and advantage.
    pub fn scored(&self, advantages: &[f64]) -> Result<Vec<ScoredTrajectory>> {
        if advantages.len() != self.trajectories.len() {
            return Err(Error::LengthMismatch {
                expected: self.trajectories.len(),
                found: advantages.len(),
            });
        }
        Ok(self
            .trajectories
            .iter()
            .zip(&self.old_token_probs)
            .zip(advantages)
            .map(|((tokens, old), &advantage)| ScoredTrajectory {
                tokens: tokens.clone(),
                old_token_probs: Some(old.clone()),
                advantage,
            })
            .collect())
    }
}

fn trajectory_label(tokens: &[usize]) -> String {
    tokens
        .iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

/// Draws `group_size` i.i.d. trajectories and packages them as a validated
/// completion group.
pub fn sample_group(
    policy: &ToyPolicy,
    env: &ToyEnvironment,
    group_size: usize,
    seed: u64,
) -> Result<SampledGroup> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trajectories: Vec<Vec<usize>> = (0..group_size).map(|_| policy.sample(&mut rng)).collect();
    let old_token_probs = trajectories
        .iter()
        .map(|t| policy.token_probs(t))
        .collect::<Result<Vec<_>>>()?;
    let embeddings = trajectories
        .iter()
        .map(|t| env.trajectory_embedding(t))
        .collect::<Result<Vec<_>>>()?;
    let group = validate_group(CompletionGroup {
        prompt_id: "toy".into(),
        completion_ids: trajectories
            .iter()
            .enumerate()
            .map(|(i, t)| format!("{i}:{}", trajectory_label(t)))
            .collect(),
        rewards: trajectories.iter().map(|t| env.reward(t)).collect(),
        embeddings,
        texts: None,
    })?;
    Ok(SampledGroup {
        group,
        trajectories,
        old_token_probs,
    })
}

/// Mode coverage of an evaluation batch.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub step: usize,
    /// Distinct rewarded modes visited at least once.
    pub mode_recall: usize,
    /// Entropy (nats) of the visit distribution over modes.
    pub mode_entropy: f64,
    pub mean_reward: f64,
    pub visits: Vec<usize>,
}

/// Samples `batch` trajectories and summarizes which modes they land in.
/// The batch for a larger `batch` extends the one for a smaller.
pub fn evaluate(
    policy: &ToyPolicy,
    env: &ToyEnvironment,
    batch: usize,
    seed: u64,
    step: usize,
) -> RunMetrics {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut visits = vec![0usize; env.num_modes()];
    let mut reward_sum = 0.0;
    for _ in 0..batch {
        let traj = policy.sample(&mut rng);
        if let Some(m) = env.mode_of(&traj) {
            visits[m] += 1;
        }
        reward_sum += env.reward(&traj);
    }
    let total: usize = visits.iter().sum();
    let mode_entropy = if total == 0 {
        0.0
    } else {
        visits
            .iter()
            .filter(|&&v| v > 0)
            .map(|&v| {
                let p = v as f64 / total as f64;
                -p * p.ln()
            })
            .sum::<f64>()
            .max(0.0)
    };
    let mode_recall = visits
        .iter()
        .zip(env.mode_rewards())
        .filter(|(&v, &r)| v > 0 && r > 0.0)
        .count();
    RunMetrics {
        step,
        mode_recall,
        mode_entropy,
        mean_reward: if batch == 0 {
            0.0
        } else {
            reward_sum / batch as f64
        },
        visits,
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub metrics: Vec<RunMetrics>,
    pub policy: ToyPolicy,
}

/// Runs sample, adjust, advantage, update for `config.steps` steps from the
/// environment's initial policy.
pub fn run_training(env: &ToyEnvironment, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let clip = config.clip_config()?;
    let train_seed = mix_seed(config.seed, TRAIN_SALT);
    let eval_seed = mix_seed(config.seed, EVAL_SALT);
    let eval = |policy: &ToyPolicy, step: usize| {
        evaluate(
            policy,
            env,
            config.eval_batch,
            mix_seed(eval_seed, step as u64),
            step,
        )
    };

    let mut policy = env.initial_policy(config.temperature)?;
    let mut metrics = vec![eval(&policy, 0)];
    for step in 1..=config.steps {
        let sampled = sample_group(
            &policy,
            env,
            config.group_size,
            mix_seed(train_seed, step as u64),
        )?;
        let rewards = if config.algorithm.adjusts_rewards() {
            adjust_group(&sampled.group, config.smi, config.epsilon)?.adjusted
        } else {
            sampled.group.rewards.clone()
        };
        let advantages = group_advantages_with_floor(&rewards, clip.mode, DEFAULT_STD_FLOOR);
        let batch = sampled.scored(&advantages.values)?;
        policy = policy_gradient_step(&policy, &batch, &clip, config.learning_rate)?;
        if step % config.eval_interval == 0 || step == config.steps {
            metrics.push(eval(&policy, step));
        }
    }
    Ok(TrainOutcome { metrics, policy })
}

pub fn train(env: &ToyEnvironment, config: &TrainConfig) -> Result<Vec<RunMetrics>> {
    Ok(run_training(env, config)?.metrics)
}

/// Writes `step,algorithm,seed,mode_recall,mode_entropy,mean_reward,visits_*`
/// rows.
pub fn write_metrics_csv<W: Write + ?Sized>(
    out: &mut W,
    algorithm: Algorithm,
    seed: u64,
    num_modes: usize,
    metrics: &[RunMetrics],
) -> io::Result<()> {
    write!(
        out,
        "step,algorithm,seed,mode_recall,mode_entropy,mean_reward"
    )?;
    for m in 0..num_modes {
        write!(out, ",visits_{m}")?;
    }
    writeln!(out)?;
    for row in metrics {
        write!(
            out,
            "{},{},{},{},{},{}",
            row.step, algorithm, seed, row.mode_recall, row.mode_entropy, row.mean_reward
        )?;
        for v in &row.visits {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
