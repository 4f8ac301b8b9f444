//! Run configuration: a flat JSON object whose keys are the field names of
//! [`RunConfig`]. Missing keys take their defaults.

use std::fs;
use std::path::Path;

use dra_core::rewards::{RewardConfig, RewardWeights};
use dra_core::sim::{Algorithm, EnvConfig, ToyEnvironment, TrainConfig};
use dra_core::smi::{SmiKind, DEFAULT_JITTER};
use dra_core::Error;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(with = "text")]
    pub algorithm: Algorithm,
    #[serde(with = "smi_name")]
    pub smi: SmiKind,
    /// Diagonal regularization for the log-det kernel.
    pub jitter: f64,
    pub epsilon: f64,
    pub group_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub clip_epsilon: f64,
    pub seed: u64,
    pub temperature: f64,
    pub eval_interval: usize,
    pub eval_batch: usize,

    pub vocab_size: usize,
    pub seq_len: usize,
    pub num_modes: usize,
    pub mode_reward: f64,
    pub within_mode_noise: f64,
    pub dominant_mode: usize,
    pub dominant_prob: f64,
    pub embedding_seed: u64,

    pub format_weight: f64,
    pub cosine_weight: f64,
    pub max_len: usize,
    pub cosine_correct_range: [f64; 2],
    pub cosine_wrong_range: [f64; 2],
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig {
            algorithm: Algorithm::DraGrpo,
            ..TrainConfig::default()
        };
        let env = EnvConfig::default();
        let rewards = RewardConfig::default();
        Self {
            algorithm: train.algorithm,
            smi: train.smi,
            jitter: DEFAULT_JITTER,
            epsilon: train.epsilon,
            group_size: train.group_size,
            steps: train.steps,
            learning_rate: train.learning_rate,
            clip_epsilon: train.clip_epsilon,
            seed: train.seed,
            temperature: train.temperature,
            eval_interval: train.eval_interval,
            eval_batch: train.eval_batch,
            vocab_size: env.vocab_size,
            seq_len: env.seq_len,
            num_modes: env.num_modes,
            mode_reward: env.mode_reward,
            within_mode_noise: env.within_mode_noise,
            dominant_mode: env.dominant_mode,
            dominant_prob: env.dominant_prob,
            embedding_seed: env.embedding_seed,
            format_weight: rewards.weights.format,
            cosine_weight: rewards.weights.cosine,
            max_len: rewards.max_len,
            cosine_correct_range: rewards.cosine_correct_range,
            cosine_wrong_range: rewards.cosine_wrong_range,
        }
    }
}

fn config_error(e: Error) -> CliError {
    match e {
        Error::InvalidConfig { field, reason } => CliError::Config {
            field: field.to_string(),
            reason,
        },
        other => CliError::Config {
            field: "config".into(),
            reason: other.to_string(),
        },
    }
}

impl RunConfig {
    pub fn smi_kind(&self) -> SmiKind {
        match self.smi {
            SmiKind::GraphCut => SmiKind::GraphCut,
            SmiKind::LogDet { .. } => SmiKind::LogDet {
                jitter: self.jitter,
            },
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            algorithm: self.algorithm,
            smi: self.smi_kind(),
            epsilon: self.epsilon,
            group_size: self.group_size,
            steps: self.steps,
            learning_rate: self.learning_rate,
            clip_epsilon: self.clip_epsilon,
            seed: self.seed,
            temperature: self.temperature,
            eval_interval: self.eval_interval,
            eval_batch: self.eval_batch,
        }
    }

    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            vocab_size: self.vocab_size,
            seq_len: self.seq_len,
            num_modes: self.num_modes,
            mode_reward: self.mode_reward,
            within_mode_noise: self.within_mode_noise,
            dominant_mode: self.dominant_mode,
            dominant_prob: self.dominant_prob,
            embedding_seed: self.embedding_seed,
        }
    }

    pub fn reward_config(&self) -> RewardConfig {
        RewardConfig {
            weights: RewardWeights {
                format: self.format_weight,
                cosine: self.cosine_weight,
            },
            max_len: self.max_len,
            cosine_correct_range: self.cosine_correct_range,
            cosine_wrong_range: self.cosine_wrong_range,
        }
    }

    /// Checks every field against the ranges of the type it configures.
    pub fn validate(&self) -> CliResult<()> {
        self.train_config().validate().map_err(config_error)?;
        ToyEnvironment::new(&self.env_config()).map_err(config_error)?;
        for (field, w) in [
            ("format_weight", self.format_weight),
            ("cosine_weight", self.cosine_weight),
        ] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(CliError::Config {
                    field: field.into(),
                    reason: format!("{w} must be finite and >= 0"),
                });
            }
        }
        self.reward_config().validate().map_err(config_error)
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| CliError::Config {
            field: "<file>".into(),
            reason: e.to_string(),
        })?;
        let Value::Object(map) = &value else {
            return Err(CliError::Config {
                field: "<file>".into(),
                reason: "expected a JSON object".into(),
            });
        };
        let known = serde_json::to_value(RunConfig::default()).expect("config serializes");
        if let Some(key) = map.keys().find(|k| known.get(k.as_str()).is_none()) {
            return Err(CliError::Config {
                field: key.clone(),
                reason: "unknown field".into(),
            });
        }
        let config: RunConfig =
            serde_path_to_error::deserialize(value).map_err(|e| CliError::Config {
                field: e.path().to_string(),
                reason: e.inner().to_string(),
            })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Serde through `Display` and `FromStr`.
mod text {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(value: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(value)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// The SMI kind by name; the log-det jitter lives in its own field.
mod smi_name {
    use dra_core::smi::SmiKind;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &SmiKind, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(value.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<SmiKind, D::Error> {
        super::text::deserialize(d)
    }
}
