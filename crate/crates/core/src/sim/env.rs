use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::group::Embedding;
use crate::sim::{mix_seed, ToyPolicy};

/// Embedding dimensions reserved for trajectories outside every mode.
pub const OFF_MODE_DIMS: usize = 8;

/// Parameters of the default landscape.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub vocab_size: usize,
    pub seq_len: usize,
    pub num_modes: usize,
    pub mode_reward: f64,
    pub within_mode_noise: f64,
    pub dominant_mode: usize,
    /// Initial probability of the dominant trajectory under
    /// [`ToyEnvironment::initial_policy`].
    pub dominant_prob: f64,
    pub embedding_seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            vocab_size: 8,
            seq_len: 3,
            num_modes: 5,
            mode_reward: 1.0,
            within_mode_noise: 0.1,
            dominant_mode: 0,
            dominant_prob: 0.7,
            embedding_seed: 0x5eed,
        }
    }
}

/// Discrete multi-modal reward landscape over fixed-length token sequences.
///
/// Each mode is a set of trajectories sharing one reward and one embedding
/// center; centers are standard basis vectors, so distinct modes are
/// orthogonal. Trajectories outside every mode earn nothing and embed into
/// [`OFF_MODE_DIMS`] extra coordinates orthogonal to all centers.
#[derive(Debug, Clone)]
pub struct ToyEnvironment {
    vocab_size: usize,
    seq_len: usize,
    modes: Vec<Vec<Vec<usize>>>,
    mode_rewards: Vec<f64>,
    within_mode_noise: f64,
    dominant_mode: usize,
    dominant_prob: f64,
    embedding_seed: u64,
    membership: HashMap<Vec<usize>, usize>,
}

impl ToyEnvironment {
    /// Default layout: the dominant mode is the all-zero sequence and mode
    /// `k` is `[0, ..., 0, k]`, so every mode branches off the dominant path
    /// at the last token.
    pub fn new(config: &EnvConfig) -> Result<Self> {
        let EnvConfig {
            vocab_size,
            seq_len,
            num_modes,
            ..
        } = *config;
        if num_modes == 0 || num_modes > vocab_size {
            return Err(invalid(
                "num_modes",
                format!("{num_modes} must be in [1, vocab_size = {vocab_size}]"),
            ));
        }
        if seq_len == 0 {
            return Err(invalid("seq_len", "must be at least 1"));
        }
        let modes = (0..num_modes)
            .map(|k| {
                let mut t = vec![0; seq_len];
                t[seq_len - 1] = k;
                vec![t]
            })
            .collect();
        Self::with_modes(
            vocab_size,
            seq_len,
            modes,
            vec![config.mode_reward; num_modes],
            config.within_mode_noise,
            config.dominant_mode,
            config.dominant_prob,
            config.embedding_seed,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_modes(
        vocab_size: usize,
        seq_len: usize,
        modes: Vec<Vec<Vec<usize>>>,
        mode_rewards: Vec<f64>,
        within_mode_noise: f64,
        dominant_mode: usize,
        dominant_prob: f64,
        embedding_seed: u64,
    ) -> Result<Self> {
        if vocab_size < 2 {
            return Err(invalid("vocab_size", "must be at least 2"));
        }
        if modes.is_empty() {
            return Err(invalid("modes", "at least one mode required"));
        }
        if mode_rewards.len() != modes.len() {
            return Err(Error::LengthMismatch {
                expected: modes.len(),
                found: mode_rewards.len(),
            });
        }
        if mode_rewards.iter().any(|r| !r.is_finite()) {
            return Err(invalid("mode_reward", "must be finite"));
        }
        if !(0.0..0.5).contains(&within_mode_noise) {
            return Err(invalid(
                "within_mode_noise",
                format!("{within_mode_noise} not in [0, 0.5)"),
            ));
        }
        if dominant_mode >= modes.len() {
            return Err(invalid("dominant_mode", "index out of range"));
        }
        if !(dominant_prob > 0.0 && dominant_prob < 1.0) {
            return Err(invalid(
                "dominant_prob",
                format!("{dominant_prob} not in (0, 1)"),
            ));
        }
        let total = vocab_size
            .checked_pow(seq_len as u32)
            .ok_or_else(|| invalid("seq_len", "trajectory space too large"))?;
        let mut membership = HashMap::new();
        for (m, mode) in modes.iter().enumerate() {
            if mode.is_empty() {
                return Err(invalid("modes", format!("mode {m} is empty")));
            }
            for traj in mode {
                if traj.len() != seq_len || traj.iter().any(|&t| t >= vocab_size) {
                    return Err(Error::BadTrajectory(format!("{traj:?} in mode {m}")));
                }
                if membership.insert(traj.clone(), m).is_some() {
                    return Err(invalid("modes", format!("{traj:?} appears twice")));
                }
            }
        }
        if membership.len() >= total {
            return Err(invalid("modes", "modes must not cover every trajectory"));
        }
        Ok(Self {
            vocab_size,
            seq_len,
            modes,
            mode_rewards,
            within_mode_noise,
            dominant_mode,
            dominant_prob,
            embedding_seed,
            membership,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[Vec<Vec<usize>>] {
        &self.modes
    }

    pub fn mode_rewards(&self) -> &[f64] {
        &self.mode_rewards
    }

    pub fn within_mode_noise(&self) -> f64 {
        self.within_mode_noise
    }

    pub fn dominant_mode(&self) -> usize {
        self.dominant_mode
    }

    pub fn embedding_dim(&self) -> usize {
        self.modes.len() + OFF_MODE_DIMS
    }

    fn check(&self, traj: &[usize]) -> Result<()> {
        if traj.len() != self.seq_len {
            return Err(Error::BadTrajectory(format!(
                "length {} != {}",
                traj.len(),
                self.seq_len
            )));
        }
        if traj.iter().any(|&t| t >= self.vocab_size) {
            return Err(Error::BadTrajectory(format!("{traj:?} outside vocabulary")));
        }
        Ok(())
    }

    pub fn mode_of(&self, traj: &[usize]) -> Option<usize> {
        self.membership.get(traj).copied()
    }

    pub fn reward(&self, traj: &[usize]) -> f64 {
        self.mode_of(traj).map_or(0.0, |m| self.mode_rewards[m])
    }

    /// Unit basis vector of mode `m`.
    pub fn mode_center(&self, m: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.embedding_dim()];
        c[m] = 1.0;
        c
    }

    fn trajectory_seed(&self, traj: &[usize]) -> u64 {
        let code = traj.iter().fold(0u64, |acc, &t| {
            acc.wrapping_mul(self.vocab_size as u64)
                .wrapping_add(t as u64)
        });
        mix_seed(self.embedding_seed, code)
    }

    /// Deterministic synthetic sentence embedding of a trajectory.
    ///
    /// Mode members sit at their mode center perturbed by
    /// `within_mode_noise` times a pseudo-random unit direction; everything
    /// else gets a pseudo-random direction in the off-mode coordinates. All
    /// coordinates are nonnegative, so row sums never drop below one. The
    /// direction is seeded by the trajectory itself, so equal trajectories
    /// embed identically.
    pub fn trajectory_embedding(&self, traj: &[usize]) -> Result<Embedding> {
        self.check(traj)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.trajectory_seed(traj));
        let dim = self.embedding_dim();
        let raw = match self.mode_of(traj) {
            Some(m) => {
                let mut v = self.mode_center(m);
                if self.within_mode_noise > 0.0 {
                    let dir = random_unit(&mut rng, dim);
                    for (x, d) in v.iter_mut().zip(dir) {
                        *x += self.within_mode_noise * d;
                    }
                }
                v
            }
            None => {
                let mut v = vec![0.0; dim];
                let dir = random_unit(&mut rng, OFF_MODE_DIMS);
                v[self.modes.len()..].copy_from_slice(&dir);
                v
            }
        };
        Embedding::new(raw).normalized(0)
    }

    /// Starting policy: uniform except along the dominant trajectory, which
    /// gets probability `dominant_prob`, split evenly across its tokens.
    pub fn initial_policy(&self, temperature: f64) -> Result<ToyPolicy> {
        let mut policy = ToyPolicy::uniform(self.vocab_size, self.seq_len, temperature)?;
        let path = &self.modes[self.dominant_mode][0];
        let per_step = self.dominant_prob.powf(1.0 / self.seq_len as f64);
        let bias = temperature * (per_step * (self.vocab_size - 1) as f64 / (1.0 - per_step)).ln();
        let vocab = self.vocab_size;
        for t in 0..self.seq_len {
            let state = policy.state_index(&path[..t]);
            policy.logits_mut()[state * vocab + path[t]] = bias;
        }
        Ok(policy)
    }
}

/// Uniform direction folded into the nonnegative orthant, so every pair of
/// synthetic embeddings has nonnegative cosine similarity.
fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim)
            .map(|_| StandardNormal.sample(rng))
            .map(|x: f64| x.abs())
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn env(noise: f64) -> ToyEnvironment {
        ToyEnvironment::new(&EnvConfig {
            within_mode_noise: noise,
            ..EnvConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn default_layout() {
        let e = env(0.1);
        assert_eq!(e.num_modes(), 5);
        assert_eq!(e.mode_of(&[0, 0, 3]), Some(3));
        assert_eq!(e.mode_of(&[1, 0, 3]), None);
        assert_eq!(e.reward(&[0, 0, 4]), 1.0);
        assert_eq!(e.reward(&[0, 0, 5]), 0.0);
    }

    #[test]
    fn zero_noise_embeds_at_center() {
        let e = env(0.0);
        for m in 0..5 {
            let emb = e.trajectory_embedding(&[0, 0, m]).unwrap();
            assert_eq!(emb.as_slice(), e.mode_center(m).as_slice());
        }
        let a = e.trajectory_embedding(&[0, 0, 1]).unwrap();
        let b = e.trajectory_embedding(&[0, 0, 2]).unwrap();
        assert_eq!(a.dot(&b), 0.0);
    }

    #[test]
    fn embeddings_are_deterministic_and_unit() {
        let e = env(0.3);
        for traj in [[0, 0, 1], [3, 2, 7], [0, 0, 0]] {
            let a = e.trajectory_embedding(&traj).unwrap();
            let b = e.trajectory_embedding(&traj).unwrap();
            assert_eq!(a, b);
            assert_abs_diff_eq!(a.norm(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(a.dot(&b), 1.0, epsilon = 1e-12);
        }
        let off = e.trajectory_embedding(&[3, 2, 7]).unwrap();
        for m in 0..5 {
            assert_eq!(off.as_slice()[m], 0.0);
        }
        // noisy mode members stay closer to their own center
        let m2 = e.trajectory_embedding(&[0, 0, 2]).unwrap();
        assert!(m2.as_slice()[2] > 0.8);
    }

    #[test]
    fn initial_policy_hits_dominant_probability() {
        let e = env(0.1);
        for temp in [1.0, 0.7] {
            let p = e.initial_policy(temp).unwrap();
            assert_abs_diff_eq!(
                p.trajectory_probability(&[0, 0, 0]).unwrap(),
                0.7,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn rejects_invalid_layouts() {
        let bad = |f: fn(&mut EnvConfig)| {
            let mut c = EnvConfig::default();
            f(&mut c);
            ToyEnvironment::new(&c).is_err()
        };
        assert!(bad(|c| c.num_modes = 9));
        assert!(bad(|c| c.within_mode_noise = 0.5));
        assert!(bad(|c| c.dominant_mode = 5));
        assert!(bad(|c| c.dominant_prob = 1.0));
        assert!(bad(|c| {
            c.seq_len = 1;
            c.num_modes = 8
        }));
        assert!(ToyEnvironment::with_modes(
            4,
            2,
            vec![vec![vec![0, 1]], vec![vec![0, 1]]],
            vec![1.0, 1.0],
            0.0,
            0,
            0.5,
            1
        )
        .is_err());
        assert!(env(0.0).trajectory_embedding(&[0, 0]).is_err());
        assert!(env(0.0).trajectory_embedding(&[0, 0, 8]).is_err());
    }
}
