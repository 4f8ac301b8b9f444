//! Per-prompt rank correlation between reward gaps and semantic distances.
//!
//! For each prompt the strict upper triangles of two `G x G` matrices are
//! paired up: absolute reward differences and cosine distances between
//! completion embeddings. Spearman's rho over those `G(G-1)/2` pairs, with a
//! two-sided p-value, says whether completions that differ more in meaning
//! also differ more in reward.
//!
//! The pairs share completions and are not independent samples, so the
//! Student-t p-value is nominal. The permutation p-value is offered as a
//! cross-check and treats pairs the same way.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{invalid, Error, Result};
use crate::group::{validate_group, CompletionGroup};
use crate::smi::cosine_similarity_matrix;

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const HISTOGRAM_BINS: usize = 20;
/// Largest sample size for which permutation p-values enumerate every
/// permutation.
pub const EXACT_PERMUTATION_MAX: usize = 10;
pub const DEFAULT_RESAMPLES: usize = 10_000;
const MIN_PAIRED_SAMPLES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseDistances {
    pub reward_diffs: Vec<f64>,
    pub embed_dists: Vec<f64>,
}

/// Upper-triangle reward gaps `|R_i - R_j|` and cosine distances
/// `1 - s(i, j)`, in row-major order.
pub fn pairwise_distances(group: &CompletionGroup) -> Result<PairwiseDistances> {
    let n = group.len();
    if n < MIN_PAIRED_SAMPLES {
        return Err(Error::GroupTooSmall {
            len: n,
            min: MIN_PAIRED_SAMPLES,
        });
    }
    let sim = cosine_similarity_matrix(&group.embeddings)?;
    let pairs = n * (n - 1) / 2;
    let mut reward_diffs = Vec::with_capacity(pairs);
    let mut embed_dists = Vec::with_capacity(pairs);
    for i in 0..n {
        for j in (i + 1)..n {
            reward_diffs.push((group.rewards[i] - group.rewards[j]).abs());
            embed_dists.push(1.0 - sim.get(i, j));
        }
    }
    Ok(PairwiseDistances {
        reward_diffs,
        embed_dists,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PValueMethod {
    #[default]
    TApprox,
    /// Exact enumeration up to [`EXACT_PERMUTATION_MAX`] samples, seeded
    /// Monte-Carlo resampling beyond.
    Permutation { resamples: usize, seed: u64 },
}

impl PValueMethod {
    pub fn name(&self) -> &'static str {
        match self {
            PValueMethod::TApprox => "tapprox",
            PValueMethod::Permutation { .. } => "permutation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spearman {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Ranks starting at one, ties sharing the mean of the ranks they span.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < MIN_PAIRED_SAMPLES {
        return Err(Error::GroupTooSmall {
            len: x.len(),
            min: MIN_PAIRED_SAMPLES,
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue {
            what: "rank correlation input".into(),
        });
    }
    Ok(())
}

fn centered(ranks: &[f64]) -> Vec<f64> {
    let mean = ranks.iter().sum::<f64>() / ranks.len() as f64;
    ranks.iter().map(|r| r - mean).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Centered rank vectors, or `DegenerateInput` when either side is constant.
fn centered_ranks(x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_pair(x, y)?;
    let rx = centered(&midranks(x));
    let ry = centered(&midranks(y));
    if dot(&rx, &rx) == 0.0 || dot(&ry, &ry) == 0.0 {
        return Err(Error::DegenerateInput("constant input vector".into()));
    }
    Ok((rx, ry))
}

fn pearson_of_centered(rx: &[f64], ry: &[f64]) -> f64 {
    (dot(rx, ry) / (dot(rx, rx) * dot(ry, ry)).sqrt()).clamp(-1.0, 1.0)
}

/// Two-sided p-value of `rho` from Student's t with `n - 2` degrees of
/// freedom.
pub fn t_approx_p_value(rho: f64, n: usize) -> f64 {
    if n < MIN_PAIRED_SAMPLES {
        return 1.0;
    }
    let denom = 1.0 - rho * rho;
    if denom <= 0.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = rho * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

/// Share of all `n!` rearrangements of `ry` whose rank covariance with `rx`
/// is at least as extreme as the observed one.
fn exact_permutation_p_value(rx: &[f64], ry: &[f64]) -> f64 {
    let n = rx.len();
    let observed = dot(rx, ry).abs();
    let tol = 1e-9 * (1.0 + observed);
    let mut y = ry.to_vec();
    let mut s = dot(rx, &y);
    let mut extreme = 0u64;
    let mut total = 0u64;
    // Heap's algorithm; each swap updates the statistic in O(1).
    let mut c = vec![0usize; n];
    let mut visit = |s: f64| {
        total += 1;
        if s.abs() >= observed - tol {
            extreme += 1;
        }
    };
    visit(s);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            let j = if i % 2 == 0 { 0 } else { c[i] };
            s += (rx[j] - rx[i]) * (y[i] - y[j]);
            y.swap(i, j);
            visit(s);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    extreme as f64 / total as f64
}

fn monte_carlo_p_value(rx: &[f64], ry: &[f64], resamples: usize, seed: u64) -> f64 {
    let observed = dot(rx, ry).abs();
    let tol = 1e-9 * (1.0 + observed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = ry.to_vec();
    let mut extreme = 0usize;
    for _ in 0..resamples {
        y.shuffle(&mut rng);
        if dot(rx, &y).abs() >= observed - tol {
            extreme += 1;
        }
    }
    (extreme + 1) as f64 / (resamples + 1) as f64
}

/// Spearman's rho with the Student-t p-value.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Spearman> {
    spearman_with(x, y, PValueMethod::TApprox)
}

pub fn spearman_with(x: &[f64], y: &[f64], method: PValueMethod) -> Result<Spearman> {
    let (rx, ry) = centered_ranks(x, y)?;
    let rho = pearson_of_centered(&rx, &ry);
    let n = x.len();
    let p_value = match method {
        PValueMethod::TApprox => t_approx_p_value(rho, n),
        PValueMethod::Permutation { .. } if n <= EXACT_PERMUTATION_MAX => {
            exact_permutation_p_value(&rx, &ry)
        }
        PValueMethod::Permutation { resamples, seed } => {
            if resamples == 0 {
                return Err(invalid("resamples", "must be at least 1"));
            }
            monte_carlo_p_value(&rx, &ry, resamples, seed)
        }
    };
    Ok(Spearman { rho, p_value, n })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisRecord {
    pub prompt_id: String,
    pub n_completions: usize,
    pub n_pairs: usize,
    pub rho: f64,
    pub p_value: f64,
    pub method: PValueMethod,
    /// Set when either distance vector is constant; `rho = 0`, `p = 1`.
    pub degenerate: bool,
}

/// Validates the group and computes its record.
pub fn analyze_group(group: CompletionGroup, method: PValueMethod) -> Result<AnalysisRecord> {
    let group = validate_group(group)?;
    let d = pairwise_distances(&group)?;
    let n = group.len();
    let (rho, p_value, degenerate) = match spearman_with(&d.reward_diffs, &d.embed_dists, method) {
        Ok(s) => (s.rho, s.p_value, false),
        Err(Error::DegenerateInput(_)) => (0.0, 1.0, true),
        Err(e) => return Err(e),
    };
    Ok(AnalysisRecord {
        prompt_id: group.prompt_id,
        n_completions: n,
        n_pairs: n * (n - 1) / 2,
        rho,
        p_value,
        method,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

/// Equal-width bins on `[0, 1]`; the last bin is closed on the right.
pub fn p_value_histogram(
    p_values: impl IntoIterator<Item = f64>,
    bins: usize,
) -> Vec<HistogramBin> {
    let mut counts = vec![0usize; bins];
    for p in p_values {
        let k = ((p * bins as f64).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            left: k as f64 / bins as f64,
            right: (k + 1) as f64 / bins as f64,
            count,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSummary {
    pub records: Vec<AnalysisRecord>,
    /// Groups that could not be analyzed, with the reason.
    pub failures: Vec<(String, Error)>,
    /// Share of records with `p > alpha`, degenerate records included.
    pub fraction_insignificant: f64,
    pub degenerate_fraction: f64,
    pub histogram: Vec<HistogramBin>,
}

/// Analyzes every group; failing groups are collected rather than aborting
/// the run.
pub fn analyze_dataset<I>(groups: I, alpha: f64, method: PValueMethod) -> Result<AnalysisSummary>
where
    I: IntoIterator<Item = CompletionGroup>,
{
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("{alpha} not in (0, 1)")));
    }
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for group in groups {
        let prompt_id = group.prompt_id.clone();
        match analyze_group(group, method) {
            Ok(r) => records.push(r),
            Err(e) => failures.push((prompt_id, e)),
        }
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = records.len() as f64;
    let insignificant = records.iter().filter(|r| r.p_value > alpha).count();
    let degenerate = records.iter().filter(|r| r.degenerate).count();
    let histogram = p_value_histogram(records.iter().map(|r| r.p_value), HISTOGRAM_BINS);
    Ok(AnalysisSummary {
        fraction_insignificant: insignificant as f64 / n,
        degenerate_fraction: degenerate as f64 / n,
        histogram,
        records,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Embedding;
    use approx::assert_abs_diff_eq;

    fn group(embeddings: &[&[f64]], rewards: &[f64]) -> CompletionGroup {
        CompletionGroup {
            prompt_id: "p".into(),
            completion_ids: (0..rewards.len()).map(|i| i.to_string()).collect(),
            rewards: rewards.to_vec(),
            embeddings: embeddings
                .iter()
                .map(|e| Embedding::new(e.to_vec()))
                .collect(),
            texts: None,
        }
    }

    #[test]
    fn distance_fixtures() {
        let d = pairwise_distances(&group(&[&[1.0, 0.0] as &[f64]; 3], &[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(d.embed_dists, vec![0.0; 3]);
        assert_eq!(d.reward_diffs, vec![1.0, 2.0, 1.0]);

        let d = pairwise_distances(&group(
            &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]],
            &[0.0; 3],
        ))
        .unwrap();
        assert_eq!(d.embed_dists, vec![1.0; 3]);

        let d = pairwise_distances(&group(
            &[&[1.0, 0.0], &[0.6, 0.8], &[0.0, 1.0]],
            &[2.782, 2.855, 0.0],
        ))
        .unwrap();
        let expected_dists = [0.4, 1.0, 0.2];
        let expected_diffs = [0.073, 2.782, 2.855];
        for k in 0..3 {
            assert_abs_diff_eq!(d.embed_dists[k], expected_dists[k], epsilon = 1e-12);
            assert_abs_diff_eq!(d.reward_diffs[k], expected_diffs[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn distances_need_three_completions() {
        assert!(matches!(
            pairwise_distances(&group(&[&[1.0], &[1.0]], &[0.0, 1.0])),
            Err(Error::GroupTooSmall { len: 2, min: 3 })
        ));
    }

    #[test]
    fn midrank_ties() {
        assert_eq!(midranks(&[1.0, 2.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(midranks(&[3.0, 3.0, 3.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(midranks(&[0.5, -1.0]), vec![2.0, 1.0]);
    }

    #[test]
    fn perfect_correlations() {
        let s = spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap();
        assert_eq!(s.rho, 1.0);
        assert_eq!(s.p_value, 0.0);
        let s = spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert_eq!(s.rho, -1.0);
    }

    #[test]
    fn constant_input_is_degenerate() {
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateInput(_))
        ));
        let r = analyze_group(
            group(&[&[1.0, 0.0], &[0.0, 1.0], &[0.6, 0.8]], &[1.0; 3]),
            PValueMethod::TApprox,
        )
        .unwrap();
        assert!(r.degenerate);
        assert_eq!((r.rho, r.p_value, r.n_pairs), (0.0, 1.0, 3));
    }

    #[test]
    fn exact_permutation_small_case() {
        // n = 3, ranks identical: only the identity and the full reversal
        // reach |rho| = 1, so p = 2/6.
        let s = spearman_with(
            &[1.0, 2.0, 3.0],
            &[1.0, 2.0, 3.0],
            PValueMethod::Permutation {
                resamples: 0,
                seed: 0,
            },
        )
        .unwrap();
        assert_abs_diff_eq!(s.p_value, 2.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn monte_carlo_permutation_is_seeded() {
        let x: Vec<f64> = (0..15).map(|i| (i as f64 * 1.3).sin()).collect();
        let y: Vec<f64> = (0..15).map(|i| (i as f64 * 0.7).cos()).collect();
        let method = PValueMethod::Permutation {
            resamples: 2000,
            seed: 5,
        };
        let a = spearman_with(&x, &y, method).unwrap();
        assert_eq!(a, spearman_with(&x, &y, method).unwrap());
        let t = spearman(&x, &y).unwrap();
        assert_abs_diff_eq!(a.p_value, t.p_value, epsilon = 0.05);
    }

    #[test]
    fn histogram_bins() {
        let h = p_value_histogram([0.0, 0.049, 0.05, 0.99, 1.0], 20);
        assert_eq!(h.len(), 20);
        assert_eq!(h[0].count, 2);
        assert_eq!(h[1].count, 1);
        assert_eq!(h[19].count, 2);
        assert_eq!((h[19].left, h[19].right), (0.95, 1.0));
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert_eq!(
            analyze_dataset(Vec::new(), 0.05, PValueMethod::TApprox),
            Err(Error::EmptyDataset)
        );
    }

    #[test]
    fn failing_groups_are_collected() {
        let good = group(&[&[1.0, 0.0], &[0.0, 1.0], &[0.6, 0.8]], &[1.0, 0.0, 0.5]);
        let mut small = group(&[&[1.0, 0.0], &[0.0, 1.0]], &[1.0, 0.0]);
        small.prompt_id = "small".into();
        let s = analyze_dataset(vec![good, small], 0.05, PValueMethod::TApprox).unwrap();
        assert_eq!(s.records.len(), 1);
        assert_eq!(s.failures.len(), 1);
        assert_eq!(s.failures[0].0, "small");
    }
}
