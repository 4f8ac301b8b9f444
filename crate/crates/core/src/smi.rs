//! Cosine kernel and the two submodular mutual information instantiations.
//!
//! For a completion `i` in a group `C`, both variants measure how much
//! information `i` shares with `C \ {i}`:
//!
//! * Graph-Cut: `sum_{j != i} s(i, j)`, which for a cosine kernel with unit
//!   self-similarity is one less than the `i`th row sum of the kernel matrix.
//!   All `G` values come out of a single pass over the matrix.
//! * Log-determinant: `logdet L_ii + logdet L_{C \ i} - logdet L_C`, computed
//!   through Cholesky factorizations. One shared factorization of the full
//!   matrix plus one per completion, `O(G^3)` per completion.

use std::fmt;
use std::str::FromStr;

use twofloat::TwoFloat;

use crate::error::{invalid, Error, Result};
use crate::group::{Embedding, SimilarityMatrix, MATRIX_TOLERANCE};

/// Diagonal jitter used by the log-determinant variant unless overridden.
pub const DEFAULT_JITTER: f64 = 1e-8;
/// Jitter retried once when the first factorization fails.
pub const FALLBACK_JITTER: f64 = 1e-6;
/// Largest accepted jitter.
pub const MAX_JITTER: f64 = 1e-3;

/// Which SMI instantiation scores a completion against the rest of its group.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SmiKind {
    #[default]
    GraphCut,
    LogDet {
        jitter: f64,
    },
}

impl SmiKind {
    pub fn log_det(jitter: f64) -> Result<Self> {
        let kind = SmiKind::LogDet { jitter };
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SmiKind::GraphCut => Ok(()),
            SmiKind::LogDet { jitter } if (0.0..=MAX_JITTER).contains(&jitter) => Ok(()),
            SmiKind::LogDet { jitter } => Err(invalid(
                "jitter",
                format!("{jitter} outside [0, {MAX_JITTER}]"),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SmiKind::GraphCut => "graphcut",
            SmiKind::LogDet { .. } => "logdet",
        }
    }
}

impl fmt::Display for SmiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SmiKind {
    type Err = Error;

    /// Parses `graphcut` or `logdet`; the latter gets [`DEFAULT_JITTER`].
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "graphcut" => Ok(SmiKind::GraphCut),
            "logdet" => Ok(SmiKind::LogDet {
                jitter: DEFAULT_JITTER,
            }),
            other => Err(invalid("smi", format!("unknown kind `{other}`"))),
        }
    }
}

/// Pairwise dot products of unit-norm embeddings.
///
/// The diagonal is set to exactly one. Negative similarities are kept as-is.
pub fn cosine_similarity_matrix(embeddings: &[Embedding]) -> Result<SimilarityMatrix> {
    let n = embeddings.len();
    let dim = embeddings.first().map_or(0, Embedding::dim);
    for e in embeddings {
        if e.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: e.dim(),
            });
        }
    }
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        let self_sim = embeddings[i].dot(&embeddings[i]);
        if !self_sim.is_finite() || (self_sim - 1.0).abs() > MATRIX_TOLERANCE {
            return Err(Error::InvalidMatrix(format!(
                "embedding {i} is not unit norm (squared norm {self_sim})"
            )));
        }
        entries[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let s = embeddings[i].dot(&embeddings[j]);
            if s.abs() > 1.0 + MATRIX_TOLERANCE {
                return Err(Error::InvalidMatrix(format!(
                    "similarity ({i}, {j}) = {s} outside [-1, 1]"
                )));
            }
            entries[i * n + j] = s;
            entries[j * n + i] = s;
        }
    }
    Ok(SimilarityMatrix::from_raw_unchecked(n, entries))
}

fn check_index(matrix: &SimilarityMatrix, i: usize) -> Result<()> {
    if i >= matrix.size() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: matrix.size(),
        });
    }
    Ok(())
}

/// Sum of the off-diagonal entries of row `i`, in column order.
fn off_diagonal_sum(matrix: &SimilarityMatrix, i: usize) -> f64 {
    matrix
        .row(i)
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, s)| s)
        .sum()
}

/// Graph-Cut SMI between completion `i` and the rest of the group.
pub fn graph_cut_smi(matrix: &SimilarityMatrix, i: usize) -> Result<f64> {
    check_index(matrix, i)?;
    Ok(off_diagonal_sum(matrix, i))
}

/// Row sums of the kernel matrix, i.e. `s(i, i) + graph_cut_smi(i)` for
/// every `i`.
pub fn graph_cut_row_sums(matrix: &SimilarityMatrix) -> Vec<f64> {
    (0..matrix.size())
        .map(|i| matrix.get(i, i) + off_diagonal_sum(matrix, i))
        .collect()
}

/// Log-determinant of `a + jitter * I` for a symmetric positive-definite
/// row-major `n x n` matrix. `None` when a pivot is not strictly positive.
///
/// The `L D L^T` factorization runs in double-double arithmetic. With a
/// rank-deficient kernel and a tiny jitter the matrix has condition number
/// near `1 / jitter`, which plain `f64` elimination turns into log-det
/// errors of a few `1e-8`.
pub fn spd_log_det(a: &[f64], n: usize, jitter: f64) -> Option<f64> {
    debug_assert_eq!(a.len(), n * n);
    let zero = TwoFloat::from(0.0);
    // w[i][k] = l[i][k] * d[k]
    let mut l = vec![zero; n * n];
    let mut w = vec![zero; n * n];
    let mut log_det = 0.0;
    for j in 0..n {
        let mut pivot = TwoFloat::from(a[j * n + j]) + jitter;
        for k in 0..j {
            pivot -= w[j * n + k] * l[j * n + k];
        }
        let hi = pivot.hi();
        if hi.is_nan() || hi <= 0.0 || hi.is_infinite() {
            return None;
        }
        log_det += hi.ln() + (pivot.lo() / hi).ln_1p();
        for i in (j + 1)..n {
            let mut v = TwoFloat::from(a[i * n + j]);
            for k in 0..j {
                v -= w[i * n + k] * l[j * n + k];
            }
            w[i * n + j] = v;
            l[i * n + j] = v / pivot;
        }
    }
    Some(log_det)
}

/// The matrix with row and column `skip` removed.
fn principal_minor(matrix: &SimilarityMatrix, skip: usize) -> Vec<f64> {
    let n = matrix.size();
    let mut out = Vec::with_capacity((n - 1) * (n - 1));
    for i in (0..n).filter(|&i| i != skip) {
        for j in (0..n).filter(|&j| j != skip) {
            out.push(matrix.get(i, j));
        }
    }
    out
}

fn jitter_schedule(jitter: f64) -> Result<Vec<f64>> {
    SmiKind::LogDet { jitter }.validate()?;
    let mut schedule = vec![jitter];
    if jitter < FALLBACK_JITTER {
        schedule.push(FALLBACK_JITTER);
    }
    Ok(schedule)
}

fn logdet_smi_with(matrix: &SimilarityMatrix, indices: &[usize], jitter: f64) -> Option<Vec<f64>> {
    let n = matrix.size();
    let full = spd_log_det(matrix.as_slice(), n, jitter)?;
    indices
        .iter()
        .map(|&i| {
            // 1x1 block L_ii + jitter
            let diag = matrix.get(i, i);
            let single = diag.ln() + (jitter / diag).ln_1p();
            let minor = spd_log_det(&principal_minor(matrix, i), n - 1, jitter)?;
            Some(single + minor - full)
        })
        .collect()
}

fn logdet_smi_indices(
    matrix: &SimilarityMatrix,
    indices: &[usize],
    jitter: f64,
) -> Result<Vec<f64>> {
    let schedule = jitter_schedule(jitter)?;
    for &j in &schedule {
        if let Some(values) = logdet_smi_with(matrix, indices, j) {
            return Ok(values);
        }
    }
    Err(Error::NotPositiveDefinite {
        jitter: *schedule.last().unwrap_or(&jitter),
    })
}

/// Log-determinant SMI between completion `i` and the rest of the group.
///
/// The kernel is regularized to `L + jitter * I`. When factorization fails
/// at the requested jitter, it is retried once at [`FALLBACK_JITTER`].
pub fn logdet_smi(matrix: &SimilarityMatrix, i: usize, jitter: f64) -> Result<f64> {
    check_index(matrix, i)?;
    Ok(logdet_smi_indices(matrix, &[i], jitter)?[0])
}

/// [`logdet_smi`] for every completion, sharing the full-matrix factorization.
pub fn logdet_smi_all(matrix: &SimilarityMatrix, jitter: f64) -> Result<Vec<f64>> {
    let indices: Vec<usize> = (0..matrix.size()).collect();
    logdet_smi_indices(matrix, &indices, jitter)
}
