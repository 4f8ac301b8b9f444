//! Completion groups, embeddings, and the pairwise similarity matrix.
//!
//! A [`CompletionGroup`] holds the `G` completions sampled for one prompt
//! together with their scalar rewards and sentence embeddings. Every group
//! computation in this crate (advantages, similarity kernels, reward
//! adjustment, rank statistics) consumes a group that has passed through
//! [`validate_group`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms below this are treated as zero.
pub const ZERO_NORM_THRESHOLD: f64 = 1e-12;

/// Vectors whose norm is within this distance of one are left untouched by
/// normalization, which keeps [`validate_group`] idempotent.
const UNIT_NORM_SLACK: f64 = 1e-14;

/// Tolerance for the symmetry, diagonal, and range checks on a
/// [`SimilarityMatrix`].
pub const MATRIX_TOLERANCE: f64 = 1e-9;

/// Minimum number of completions in a group.
pub const MIN_GROUP_SIZE: usize = 2;

/// A dense embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Returns the L2-normalized vector.
    ///
    /// `index` only labels the error.
    pub fn normalized(&self, index: usize) -> Result<Embedding> {
        if !self.is_finite() {
            return Err(Error::NonFiniteValue {
                what: format!("embedding {index}"),
            });
        }
        let norm = self.norm();
        if norm < ZERO_NORM_THRESHOLD {
            return Err(Error::ZeroNormEmbedding { index, norm });
        }
        if (norm - 1.0).abs() <= UNIT_NORM_SLACK {
            return Ok(self.clone());
        }
        Ok(Embedding(self.0.iter().map(|v| v / norm).collect()))
    }
}

impl From<Vec<f64>> for Embedding {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// The completions sampled for one prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionGroup {
    pub prompt_id: String,
    pub completion_ids: Vec<String>,
    pub rewards: Vec<f64>,
    pub embeddings: Vec<Embedding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub texts: Option<Vec<String>>,
}

impl CompletionGroup {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Embedding dimension, taken from the first completion.
    pub fn dim(&self) -> usize {
        self.embeddings.first().map_or(0, Embedding::dim)
    }
}

/// Checks every group invariant and returns the group with unit-norm
/// embeddings.
pub fn validate_group(group: CompletionGroup) -> Result<CompletionGroup> {
    let len = group.rewards.len();
    if len < MIN_GROUP_SIZE {
        return Err(Error::GroupTooSmall {
            len,
            min: MIN_GROUP_SIZE,
        });
    }
    for found in [group.embeddings.len(), group.completion_ids.len()] {
        if found != len {
            return Err(Error::LengthMismatch {
                expected: len,
                found,
            });
        }
    }
    if let Some(texts) = &group.texts {
        if texts.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                found: texts.len(),
            });
        }
    }
    if let Some(i) = group.rewards.iter().position(|r| !r.is_finite()) {
        return Err(Error::NonFiniteValue {
            what: format!("reward {i}"),
        });
    }

    let dim = group.embeddings[0].dim();
    for e in &group.embeddings {
        if e.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: e.dim(),
            });
        }
    }
    let embeddings = group
        .embeddings
        .iter()
        .enumerate()
        .map(|(i, e)| e.normalized(i))
        .collect::<Result<Vec<_>>>()?;

    Ok(CompletionGroup {
        embeddings,
        ..group
    })
}

/// Symmetric `G x G` kernel matrix with unit diagonal, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    size: usize,
    entries: Vec<f64>,
}

impl SimilarityMatrix {
    /// Builds a matrix from row-major entries, checking symmetry, the unit
    /// diagonal, and the cosine range.
    pub fn new(size: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != size * size {
            return Err(Error::LengthMismatch {
                expected: size * size,
                found: entries.len(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                what: "similarity matrix".into(),
            });
        }
        for i in 0..size {
            let d = entries[i * size + i];
            if (d - 1.0).abs() > MATRIX_TOLERANCE {
                return Err(Error::InvalidMatrix(format!("diagonal entry {i} is {d}")));
            }
            for j in 0..size {
                let v = entries[i * size + j];
                if v.abs() > 1.0 + MATRIX_TOLERANCE {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({i}, {j}) = {v} outside [-1, 1]"
                    )));
                }
                if (v - entries[j * size + i]).abs() > MATRIX_TOLERANCE {
                    return Err(Error::InvalidMatrix(format!(
                        "entries ({i}, {j}) and ({j}, {i}) differ"
                    )));
                }
            }
        }
        Ok(Self { size, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        let mut entries = Vec::with_capacity(size * size);
        for row in rows {
            if row.len() != size {
                return Err(Error::LengthMismatch {
                    expected: size,
                    found: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::new(size, entries)
    }

    pub fn identity(size: usize) -> Self {
        let mut entries = vec![0.0; size * size];
        for i in 0..size {
            entries[i * size + i] = 1.0;
        }
        Self { size, entries }
    }

    /// Every entry equal to one: `size` identical completions.
    pub fn ones(size: usize) -> Self {
        Self {
            size,
            entries: vec![1.0; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.size..(i + 1) * self.size]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    /// Simultaneously permutes rows and columns: entry `(a, b)` of the result
    /// is entry `(perm[a], perm[b])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.size;
        let mut entries = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                entries[a * n + b] = self.get(perm[a], perm[b]);
            }
        }
        Self { size: n, entries }
    }

    pub(crate) fn from_raw_unchecked(size: usize, entries: Vec<f64>) -> Self {
        Self { size, entries }
    }
}
