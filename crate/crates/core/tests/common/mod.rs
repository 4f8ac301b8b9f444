#![allow(dead_code)]

use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::collection::vec;
use proptest::prelude::*;
use std::ops::RangeInclusive;

/// Rows of random unit vectors: `g` rows of dimension `d`.
pub fn unit_rows(
    g: RangeInclusive<usize>,
    d: RangeInclusive<usize>,
) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (g, d)
        .prop_flat_map(|(g, d)| vec(vec(-1.0f64..1.0, d), g))
        .prop_filter("zero-norm row", |rows| {
            rows.iter()
                .all(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt() > 1e-3)
        })
        .prop_map(|rows| {
            rows.into_iter()
                .map(|r| {
                    let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
                    r.into_iter().map(|x| x / n).collect()
                })
                .collect()
        })
}

/// Exact rational value of each double.
pub fn rationals(a: &[f64]) -> Vec<BigRational> {
    a.iter()
        .map(|&x| BigRational::from_float(x).expect("finite entry"))
        .collect()
}

/// Determinant of a row-major `n x n` rational matrix by exact Gaussian
/// elimination.
pub fn exact_det(mut m: Vec<BigRational>, n: usize) -> BigRational {
    let mut det = BigRational::one();
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| !m[r * n + col].is_zero()) else {
            return BigRational::zero();
        };
        if p != col {
            for k in 0..n {
                m.swap(col * n + k, p * n + k);
            }
            det = -det;
        }
        let pivot = m[col * n + col].clone();
        for r in (col + 1)..n {
            if m[r * n + col].is_zero() {
                continue;
            }
            let f = &m[r * n + col] / &pivot;
            for k in col..n {
                let delta = &f * &m[col * n + k];
                m[r * n + k] -= delta;
            }
        }
        det *= pivot;
    }
    det
}

use dra_core::advantage::{surrogate_objective, AdvantageMode, ClipConfig, ScoredTrajectory};
use dra_core::sim::ToyPolicy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Central finite differences of the clipped surrogate in every logit.
pub fn finite_difference_gradient(
    policy: &ToyPolicy,
    batch: &[ScoredTrajectory],
    cfg: &ClipConfig,
    h: f64,
) -> Vec<f64> {
    let mut grad = vec![0.0; policy.logits().len()];
    for (k, g) in grad.iter_mut().enumerate() {
        let mut plus = policy.clone();
        plus.logits_mut()[k] += h;
        let mut minus = policy.clone();
        minus.logits_mut()[k] -= h;
        let up = surrogate_objective(&plus, batch, cfg).unwrap();
        let down = surrogate_objective(&minus, batch, cfg).unwrap();
        *g = (up - down) / (2.0 * h);
    }
    grad
}

pub struct GradientCase {
    pub policy: ToyPolicy,
    pub batch: Vec<ScoredTrajectory>,
    pub cfg: ClipConfig,
}

/// Random tabular policy (vocab 2..=8, length 1..=3) scored against a
/// perturbed behaviour policy, rejected while any token ratio sits within
/// `margin` of a clip boundary.
pub fn random_gradient_case(rng: &mut ChaCha8Rng, margin: f64) -> GradientCase {
    loop {
        let vocab = rng.random_range(2..=8);
        let len = rng.random_range(1..=3);
        let temperature = rng.random_range(0.5..2.0);
        let mode = if rng.random_bool(0.5) {
            AdvantageMode::Grpo
        } else {
            AdvantageMode::DrGrpo
        };
        let cfg = ClipConfig::new(rng.random_range(0.1..0.3), mode).unwrap();
        let n = ToyPolicy::uniform(vocab, len, temperature)
            .unwrap()
            .logits()
            .len();
        let old_logits: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let new_logits: Vec<f64> = old_logits
            .iter()
            .map(|l| l + 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let old = ToyPolicy::from_logits(vocab, len, temperature, old_logits).unwrap();
        let policy = ToyPolicy::from_logits(vocab, len, temperature, new_logits).unwrap();
        let batch: Vec<ScoredTrajectory> = (0..6)
            .map(|_| {
                let tokens = old.sample(rng);
                ScoredTrajectory {
                    old_token_probs: Some(old.token_probs(&tokens).unwrap()),
                    advantage: rng.sample(StandardNormal),
                    tokens,
                }
            })
            .collect();
        let near_boundary = batch.iter().any(|t| {
            let new = policy.token_probs(&t.tokens).unwrap();
            new.iter()
                .zip(t.old_token_probs.as_ref().unwrap())
                .any(|(p, q)| {
                    let r = p / q;
                    (r - (1.0 - cfg.epsilon)).abs() < margin
                        || (r - (1.0 + cfg.epsilon)).abs() < margin
                })
        });
        if !near_boundary {
            return GradientCase { policy, batch, cfg };
        }
    }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Exact expectations over every ordered group of `g` i.i.d. draws from the
/// categorical `q` over items with rewards `r`: the plain group-mean reward,
/// and the sum of `R_i / multiplicity_i`.
pub fn enumerate_group_expectations(q: &[f64], r: &[f64], g: usize) -> (f64, f64) {
    let k = q.len();
    let total = k.pow(g as u32);
    let (mut vanilla, mut dra) = (0.0, 0.0);
    let mut draw = vec![0usize; g];
    for code in 0..total {
        let mut c = code;
        for slot in draw.iter_mut() {
            *slot = c % k;
            c /= k;
        }
        let p: f64 = draw.iter().map(|&m| q[m]).product();
        let mut counts = vec![0usize; k];
        for &m in &draw {
            counts[m] += 1;
        }
        let mean = draw.iter().map(|&m| r[m]).sum::<f64>() / g as f64;
        let adjusted: f64 = draw.iter().map(|&m| r[m] / counts[m] as f64).sum();
        vanilla += p * mean;
        dra += p * adjusted;
    }
    (vanilla, dra)
}
