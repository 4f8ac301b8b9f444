use crate::adjust::adjust_group;
use crate::error::{invalid, Error, Result};
use crate::sim::{mix_seed, sample_group, ToyEnvironment, ToyPolicy};
use crate::smi::SmiKind;

#[derive(Debug, Clone, PartialEq)]
pub struct IpsConfig {
    pub group_size: usize,
    pub trials: usize,
    pub seed: u64,
    pub epsilon: f64,
}

impl Default for IpsConfig {
    fn default() -> Self {
        Self {
            group_size: 6,
            trials: 100_000,
            seed: 0,
            epsilon: 0.0,
        }
    }
}

/// Bias of the plain group-mean reward and of the adjusted reward sum,
/// both measured against the sum of rewards over every rewarded trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct IpsReport {
    /// Sum of rewards over all rewarded trajectories (uniform measure).
    pub target: f64,
    /// Exact `E_q[R]`, the expectation of the plain group mean.
    pub vanilla_expected: f64,
    /// Exact expectation of the adjusted reward sum with `epsilon = 0`:
    /// `sum_m R_m (1 - (1 - q_m)^G)`.
    pub dra_expected: f64,
    pub vanilla_mean: f64,
    pub dra_mean: f64,
    pub vanilla_se: f64,
    pub dra_se: f64,
    /// `|vanilla_mean - target|`
    pub vanilla_bias: f64,
    /// `|dra_mean - target|`
    pub dra_bias: f64,
    /// Largest per-group gap between the adjusted reward sum and the reward
    /// summed over the distinct trajectories present.
    pub max_identity_error: f64,
}

/// Closed-form expectation of the reward summed over the distinct
/// trajectories of a group of `group_size` i.i.d. draws.
pub fn expected_distinct_reward(probs_and_rewards: &[(f64, f64)], group_size: usize) -> f64 {
    probs_and_rewards
        .iter()
        .map(|&(q, r)| r * (1.0 - (1.0 - q).powi(group_size as i32)))
        .sum()
}

fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte-Carlo comparison of the vanilla and adjusted reward estimators
/// against the uniform-measure target, in the geometry where every mode is
/// a single trajectory embedded exactly at its center. There, Graph-Cut row
/// sums are duplicate counts and the adjusted rewards of a group sum to the
/// reward of its distinct members.
pub fn ips_debias_check(
    env: &ToyEnvironment,
    policy: &ToyPolicy,
    config: &IpsConfig,
) -> Result<IpsReport> {
    if env.within_mode_noise() != 0.0 {
        return Err(Error::GeometryNotExact(format!(
            "within-mode noise is {}",
            env.within_mode_noise()
        )));
    }
    if let Some(m) = env.modes().iter().position(|mode| mode.len() != 1) {
        return Err(Error::GeometryNotExact(format!(
            "mode {m} has {} trajectories",
            env.modes()[m].len()
        )));
    }
    if config.trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }

    let target: f64 = env.mode_rewards().iter().sum();
    let vanilla_expected: f64 = policy
        .distribution()
        .iter()
        .map(|(t, q)| q * env.reward(t))
        .sum();
    let mode_probs = env
        .modes()
        .iter()
        .zip(env.mode_rewards())
        .map(|(mode, &r)| Ok((policy.trajectory_probability(&mode[0])?, r)))
        .collect::<Result<Vec<_>>>()?;
    let dra_expected = expected_distinct_reward(&mode_probs, config.group_size);

    let mut vanilla = Vec::with_capacity(config.trials);
    let mut dra = Vec::with_capacity(config.trials);
    let mut max_identity_error: f64 = 0.0;
    for trial in 0..config.trials {
        let sampled = sample_group(
            policy,
            env,
            config.group_size,
            mix_seed(config.seed, trial as u64),
        )?;
        let rewards = &sampled.group.rewards;
        vanilla.push(rewards.iter().sum::<f64>() / rewards.len() as f64);

        let adjusted = adjust_group(&sampled.group, SmiKind::GraphCut, config.epsilon)?.adjusted;
        let adjusted_sum: f64 = adjusted.iter().sum();
        dra.push(adjusted_sum);

        let mut distinct = sampled.trajectories.clone();
        distinct.sort();
        distinct.dedup();
        let distinct_sum: f64 = distinct.iter().map(|t| env.reward(t)).sum();
        max_identity_error = max_identity_error.max((adjusted_sum - distinct_sum).abs());
    }
    let (vanilla_mean, vanilla_se) = mean_and_se(&vanilla);
    let (dra_mean, dra_se) = mean_and_se(&dra);
    Ok(IpsReport {
        target,
        vanilla_expected,
        dra_expected,
        vanilla_mean,
        dra_mean,
        vanilla_se,
        dra_se,
        vanilla_bias: (vanilla_mean - target).abs(),
        dra_bias: (dra_mean - target).abs(),
        max_identity_error,
    })
}
