use std::hint::black_box;
use std::path::Path;
use std::time::{Duration, Instant};

use dra_core::adjust::dra_weights;
use dra_core::group::{Embedding, SimilarityMatrix};
use dra_core::smi::{cosine_similarity_matrix, SmiKind, DEFAULT_JITTER};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CliError, CliResult};
use crate::output::write_csv_atomic;

pub const MIN_BENCH_G: usize = 8;
/// Smallest group in the doubling grid.
const GRID_START: usize = 4;
/// Minimum wall time of one timed batch of calls.
const BATCH_TIME: Duration = Duration::from_micros(200);

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub group_size: usize,
    pub graphcut_us: f64,
    pub logdet_us: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub graphcut_slope: f64,
    pub logdet_slope: f64,
}

impl BenchReport {
    pub fn row(&self, group_size: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.group_size == group_size)
    }
}

pub fn doubling_grid(max_g: usize) -> Vec<usize> {
    std::iter::successors(Some(GRID_START), |g| Some(g * 2))
        .take_while(|&g| g <= max_g)
        .collect()
}

fn random_matrix(g: usize, dim: usize, rng: &mut ChaCha8Rng) -> SimilarityMatrix {
    let embeddings: Vec<Embedding> = (0..g)
        .map(|i| {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            Embedding::new(v)
                .normalized(i)
                .expect("nonzero gaussian vector")
        })
        .collect();
    cosine_similarity_matrix(&embeddings).expect("unit embeddings")
}

/// Median over `repetitions` of the mean time per call, in microseconds.
fn median_us(repetitions: usize, mut call: impl FnMut()) -> f64 {
    let mut samples: Vec<f64> = (0..repetitions)
        .map(|_| {
            let start = Instant::now();
            let mut calls = 0u32;
            while calls == 0 || start.elapsed() < BATCH_TIME {
                call();
                calls += 1;
            }
            start.elapsed().as_secs_f64() * 1e6 / calls as f64
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    let mid = samples.len() / 2;
    if samples.len().is_multiple_of(2) {
        (samples[mid - 1] + samples[mid]) / 2.0
    } else {
        samples[mid]
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Times weight computation for both SMI kinds on random unit embeddings
/// over a doubling grid of group sizes.
pub fn run_bench(
    max_g: usize,
    repetitions: usize,
    dim: usize,
    epsilon: f64,
    seed: u64,
) -> CliResult<BenchReport> {
    if max_g < MIN_BENCH_G {
        return Err(CliError::Usage(format!(
            "max G must be at least {MIN_BENCH_G}"
        )));
    }
    if repetitions == 0 || dim == 0 {
        return Err(CliError::Usage(
            "repetitions and dim must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let logdet = SmiKind::LogDet {
        jitter: DEFAULT_JITTER,
    };
    let mut rows = Vec::new();
    for g in doubling_grid(max_g) {
        let m = random_matrix(g, dim, &mut rng);
        dra_weights(&m, logdet, epsilon)?;
        let graphcut_us = median_us(repetitions, || {
            black_box(dra_weights(black_box(&m), SmiKind::GraphCut, epsilon).ok());
        });
        let logdet_us = median_us(repetitions, || {
            black_box(dra_weights(black_box(&m), logdet, epsilon).ok());
        });
        rows.push(BenchRow {
            group_size: g,
            graphcut_us,
            logdet_us,
        });
    }
    let fit = |f: fn(&BenchRow) -> f64| {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.group_size as f64, f(r))).collect();
        log_log_slope(&pts)
    };
    Ok(BenchReport {
        graphcut_slope: fit(|r| r.graphcut_us),
        logdet_slope: fit(|r| r.logdet_us),
        rows,
    })
}

pub fn write_bench_csv(path: &Path, report: &BenchReport) -> CliResult<()> {
    write_csv_atomic(path, |w| {
        w.write_record(["G", "graphcut_us", "logdet_us"])?;
        for r in &report.rows {
            w.write_record([
                r.group_size.to_string(),
                r.graphcut_us.to_string(),
                r.logdet_us.to_string(),
            ])?;
        }
        Ok(())
    })
}
