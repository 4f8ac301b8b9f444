use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::Path;

use dra_core::group::{CompletionGroup, Embedding};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CliError, CliResult};
use crate::io::write_completions;

/// Scale of the isotropic noise added to monotone-dataset embeddings.
const ARC_NOISE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Rewards independent of embeddings.
    Null,
    /// Embeddings on a quarter circle with reward proportional to the angle,
    /// so reward gaps and cosine distances rise together.
    Monotone,
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::Null => "null",
            SynthKind::Monotone => "monotone",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub kind: SynthKind,
    pub prompts: usize,
    pub group_size: usize,
    pub dim: usize,
    pub seed: u64,
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit(v: Vec<f64>) -> Embedding {
    Embedding::new(v).normalized(0).expect("nonzero vector")
}

fn completion(rng: &mut ChaCha8Rng, kind: SynthKind, dim: usize) -> (f64, Embedding) {
    match kind {
        SynthKind::Null => {
            let reward = StandardNormal.sample(rng);
            (reward, unit(gaussian(rng, dim)))
        }
        SynthKind::Monotone => {
            let theta = rng.random_range(0.0..FRAC_PI_2);
            let mut v: Vec<f64> = gaussian(rng, dim)
                .into_iter()
                .map(|x| ARC_NOISE * x / (dim as f64).sqrt())
                .collect();
            v[0] += theta.cos();
            v[1] += theta.sin();
            (theta / FRAC_PI_2, unit(v))
        }
    }
}

pub fn synth_groups(options: &SynthOptions) -> CliResult<Vec<CompletionGroup>> {
    if options.dim < 2 || options.group_size < 2 || options.prompts == 0 {
        return Err(CliError::Usage(
            "need dim >= 2, group size >= 2 and at least one prompt".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    Ok((0..options.prompts)
        .map(|p| {
            let (rewards, embeddings) = (0..options.group_size)
                .map(|_| completion(&mut rng, options.kind, options.dim))
                .unzip();
            CompletionGroup {
                prompt_id: format!("{}-{p:05}", options.kind),
                completion_ids: (0..options.group_size).map(|i| format!("c{i}")).collect(),
                rewards,
                embeddings,
                texts: None,
            }
        })
        .collect())
}

pub fn run_synth(options: &SynthOptions, output: &Path) -> CliResult<usize> {
    let groups = synth_groups(options)?;
    write_completions(output, &groups)?;
    Ok(groups.len())
}
