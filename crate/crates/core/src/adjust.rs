//! Diversity-aware reward adjustment.
//!
//! Each completion's reward is divided by one plus its SMI with the rest of
//! its group, so completions that repeat what the group already covers are
//! down-weighted and distinct completions keep their reward. For the
//! Graph-Cut kernel the denominator is the row sum of the similarity matrix
//! (the self-similarity supplies the one), giving an `O(G^2)` weight pass.
//!
//! `epsilon` is added to every denominator. `epsilon = 0` gives the exact
//! `R / (1 + SMI)` rule; [`DEFAULT_EPSILON`] matches the batched reference
//! computation `1 / (row_sums + 1e-6)`.

use crate::error::{invalid, Error, Result};
use crate::group::{CompletionGroup, SimilarityMatrix};
use crate::smi::{cosine_similarity_matrix, graph_cut_row_sums, logdet_smi_all, SmiKind};

pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Per-completion multiplicative reward factors `1 / (1 + SMI + epsilon)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DraWeights {
    pub values: Vec<f64>,
    pub kind: SmiKind,
    pub epsilon: f64,
}

impl DraWeights {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Computes the adjustment weights for every completion of a group.
///
/// A denominator that is not strictly positive (only reachable with strongly
/// negative similarities) rejects the whole group.
pub fn dra_weights(matrix: &SimilarityMatrix, kind: SmiKind, epsilon: f64) -> Result<DraWeights> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(invalid(
            "epsilon",
            format!("{epsilon} must be finite and >= 0"),
        ));
    }
    kind.validate()?;
    let denominators: Vec<f64> = match kind {
        SmiKind::GraphCut => graph_cut_row_sums(matrix)
            .into_iter()
            .map(|s| s + epsilon)
            .collect(),
        SmiKind::LogDet { jitter } => logdet_smi_all(matrix, jitter)?
            .into_iter()
            .map(|smi| 1.0 + smi + epsilon)
            .collect(),
    };
    let values = denominators
        .into_iter()
        .enumerate()
        .map(|(index, d)| {
            if d > 0.0 && d.is_finite() {
                Ok(1.0 / d)
            } else {
                Err(Error::NonPositiveDenominator { index, value: d })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DraWeights {
        values,
        kind,
        epsilon,
    })
}

/// Multiplies each reward by its weight.
pub fn adjust_rewards(rewards: &[f64], weights: &DraWeights) -> Result<Vec<f64>> {
    if rewards.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: weights.len(),
            found: rewards.len(),
        });
    }
    Ok(rewards
        .iter()
        .zip(&weights.values)
        .map(|(r, w)| r * w)
        .collect())
}

/// Weights and adjusted rewards for a validated group.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedGroup {
    pub weights: DraWeights,
    pub adjusted: Vec<f64>,
}

/// Runs the full adjustment on a validated group: cosine kernel, weights,
/// reweighted rewards.
pub fn adjust_group(group: &CompletionGroup, kind: SmiKind, epsilon: f64) -> Result<AdjustedGroup> {
    let matrix = cosine_similarity_matrix(&group.embeddings)?;
    let weights = dra_weights(&matrix, kind, epsilon)?;
    let adjusted = adjust_rewards(&group.rewards, &weights)?;
    Ok(AdjustedGroup { weights, adjusted })
}
