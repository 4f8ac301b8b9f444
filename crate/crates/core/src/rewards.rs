//! Rule-based completion rewards: answer accuracy, a length-scaled cosine
//! variant of it, and a check for the closing reasoning tag.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Closing tag that must appear exactly once in a well-formed completion.
pub const THINK_CLOSE_TAG: &str = "\n</think>\n";

pub const FORMAT: &str = "format";
pub const COSINE: &str = "cosine";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub format: f64,
    pub cosine: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            format: 1.0,
            cosine: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub weights: RewardWeights,
    pub max_len: usize,
    /// `[min, max]` for correct answers; the maximum goes to the shortest.
    pub cosine_correct_range: [f64; 2],
    /// `[min, max]` for wrong answers; the minimum goes to the shortest.
    pub cosine_wrong_range: [f64; 2],
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            weights: RewardWeights::default(),
            max_len: 3584,
            cosine_correct_range: [0.5, 1.0],
            cosine_wrong_range: [-1.0, -0.5],
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        if !(w.format >= 0.0 && w.format.is_finite() && w.cosine >= 0.0 && w.cosine.is_finite()) {
            return Err(invalid("weights", "must be finite and nonnegative"));
        }
        if self.max_len == 0 {
            return Err(invalid("max_len", "must be at least 1"));
        }
        let [lo_c, hi_c] = self.cosine_correct_range;
        if !(lo_c.is_finite() && hi_c.is_finite() && hi_c >= lo_c) {
            return Err(invalid("cosine_correct_range", "need min <= max"));
        }
        let [lo_w, hi_w] = self.cosine_wrong_range;
        if !(lo_w.is_finite() && hi_w.is_finite() && lo_w <= hi_w && hi_w <= 0.0) {
            return Err(invalid("cosine_wrong_range", "need min <= max <= 0"));
        }
        Ok(())
    }
}

fn normalize(s: &str) -> String {
    s.trim().to_lowercase()
}

/// 1 when the trimmed, lower-cased strings agree.
pub fn accuracy_reward(answer: &str, ground_truth: &str) -> f64 {
    if normalize(answer) == normalize(ground_truth) {
        1.0
    } else {
        0.0
    }
}

/// 1 when [`THINK_CLOSE_TAG`] occurs exactly once (non-overlapping count).
pub fn format_reward(text: &str) -> f64 {
    if text.matches(THINK_CLOSE_TAG).count() == 1 {
        1.0
    } else {
        0.0
    }
}

/// Half-cosine interpolation over length: short correct answers earn the
/// most, short wrong answers are penalized the most.
pub fn cosine_reward(correct: bool, len: usize, config: &RewardConfig) -> Result<f64> {
    if len > config.max_len {
        return Err(Error::LengthOutOfRange {
            len,
            max_len: config.max_len,
        });
    }
    let t = len as f64 / config.max_len as f64;
    let c = 0.5 * (1.0 + (PI * t).cos());
    Ok(if correct {
        let [lo, hi] = config.cosine_correct_range;
        lo + (hi - lo) * c
    } else {
        let [lo, hi] = config.cosine_wrong_range;
        hi + (lo - hi) * c
    })
}

/// Weighted sum of named components; names must be `format` or `cosine`.
pub fn combined_reward<'a, I>(components: I, config: &RewardConfig) -> Result<f64>
where
    I: IntoIterator<Item = (&'a str, f64)>,
{
    let mut total = 0.0;
    for (name, value) in components {
        let weight = match name {
            FORMAT => config.weights.format,
            COSINE => config.weights.cosine,
            other => return Err(Error::UnknownComponent(other.to_string())),
        };
        total += weight * value;
    }
    Ok(total)
}

/// Text after the last closing tag, or the whole text when the tag is absent.
pub fn extract_answer(text: &str) -> &str {
    match text.rfind(THINK_CLOSE_TAG) {
        Some(pos) => &text[pos + THINK_CLOSE_TAG.len()..],
        None => text,
    }
}

/// Full reward of a completion: format plus length-scaled accuracy. Length
/// is measured in characters; an explicit `answer` overrides extraction.
pub fn score_completion(
    text: &str,
    answer: Option<&str>,
    ground_truth: &str,
    config: &RewardConfig,
) -> Result<f64> {
    let answer = answer.unwrap_or_else(|| extract_answer(text));
    let correct = accuracy_reward(answer, ground_truth) == 1.0;
    let len = text.chars().count().min(config.max_len);
    let cosine = cosine_reward(correct, len, config)?;
    combined_reward([(FORMAT, format_reward(text)), (COSINE, cosine)], config)
}
