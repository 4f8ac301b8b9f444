use rand::Rng;

use crate::error::{invalid, Error, Result};

/// Largest trajectory space the policy will enumerate.
pub const MAX_ENUMERABLE: usize = 1 << 20;

/// Logit assigned to tokens that should be unreachable when a policy is built
/// from a target distribution; `exp(-690)` is about `1e-300`.
const UNREACHABLE_LOGIT: f64 = -690.0;

/// Tabular autoregressive categorical policy over fixed-length token
/// sequences.
///
/// There is one logit row per prefix (every prefix of length `0..L` is its
/// own state), so `(V^L - 1) / (V - 1)` rows of `V` logits each. Token
/// probabilities are `softmax(logits / temperature)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyPolicy {
    vocab_size: usize,
    seq_len: usize,
    temperature: f64,
    logits: Vec<f64>,
}

fn num_states(vocab_size: usize, seq_len: usize) -> usize {
    (0..seq_len).map(|t| vocab_size.pow(t as u32)).sum()
}

impl ToyPolicy {
    pub fn uniform(vocab_size: usize, seq_len: usize, temperature: f64) -> Result<Self> {
        if vocab_size < 2 {
            return Err(invalid("vocab_size", "must be at least 2"));
        }
        if seq_len < 1 {
            return Err(invalid("seq_len", "must be at least 1"));
        }
        match vocab_size.checked_pow(seq_len as u32) {
            Some(n) if n <= MAX_ENUMERABLE => {}
            _ => return Err(invalid("seq_len", "trajectory space too large to tabulate")),
        }
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(invalid("temperature", format!("{temperature} must be > 0")));
        }
        Ok(Self {
            vocab_size,
            seq_len,
            temperature,
            logits: vec![0.0; num_states(vocab_size, seq_len) * vocab_size],
        })
    }

    pub fn from_logits(
        vocab_size: usize,
        seq_len: usize,
        temperature: f64,
        logits: Vec<f64>,
    ) -> Result<Self> {
        let mut policy = Self::uniform(vocab_size, seq_len, temperature)?;
        if logits.len() != policy.logits.len() {
            return Err(Error::LengthMismatch {
                expected: policy.logits.len(),
                found: logits.len(),
            });
        }
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFiniteValue {
                what: "policy logits".into(),
            });
        }
        policy.logits = logits;
        Ok(policy)
    }

    /// Builds a policy whose trajectory distribution matches `targets`
    /// (trajectory, mass) pairs. Trajectories not listed get probability of
    /// order `1e-300`.
    pub fn from_distribution(
        vocab_size: usize,
        seq_len: usize,
        temperature: f64,
        targets: &[(Vec<usize>, f64)],
    ) -> Result<Self> {
        let mut policy = Self::uniform(vocab_size, seq_len, temperature)?;
        let mut mass = vec![0.0; policy.logits.len()];
        for (traj, p) in targets {
            policy.check_trajectory(traj)?;
            if !(p.is_finite() && *p >= 0.0) {
                return Err(invalid("distribution", format!("mass {p} must be >= 0")));
            }
            for t in 0..seq_len {
                let state = policy.state_index(&traj[..t]);
                mass[state * vocab_size + traj[t]] += p;
            }
        }
        for state in 0..policy.num_states() {
            let row = state * vocab_size..(state + 1) * vocab_size;
            let total: f64 = mass[row.clone()].iter().sum();
            for k in row {
                policy.logits[k] = if mass[k] > 0.0 {
                    temperature * (mass[k] / total).ln()
                } else {
                    temperature * UNREACHABLE_LOGIT
                };
            }
        }
        Ok(policy)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn num_states(&self) -> usize {
        self.logits.len() / self.vocab_size
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    pub fn check_trajectory(&self, tokens: &[usize]) -> Result<()> {
        if tokens.len() != self.seq_len {
            return Err(Error::BadTrajectory(format!(
                "length {} != {}",
                tokens.len(),
                self.seq_len
            )));
        }
        if let Some(t) = tokens.iter().find(|&&t| t >= self.vocab_size) {
            return Err(Error::BadTrajectory(format!(
                "token {t} outside vocabulary of {}",
                self.vocab_size
            )));
        }
        Ok(())
    }

    /// Row index of the state reached after emitting `prefix`.
    pub fn state_index(&self, prefix: &[usize]) -> usize {
        let offset = num_states(self.vocab_size, prefix.len());
        let code = prefix.iter().fold(0, |acc, &t| acc * self.vocab_size + t);
        offset + code
    }

    pub fn state_logits(&self, state: usize) -> &[f64] {
        &self.logits[state * self.vocab_size..(state + 1) * self.vocab_size]
    }

    /// Next-token distribution at a state.
    pub fn state_probs(&self, state: usize) -> Vec<f64> {
        let row = self.state_logits(state);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row
            .iter()
            .map(|l| ((l - max) / self.temperature).exp())
            .collect();
        let total: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / total).collect()
    }

    /// Probability of each emitted token given its prefix.
    pub fn token_probs(&self, tokens: &[usize]) -> Result<Vec<f64>> {
        self.check_trajectory(tokens)?;
        Ok((0..tokens.len())
            .map(|t| self.state_probs(self.state_index(&tokens[..t]))[tokens[t]])
            .collect())
    }

    pub fn trajectory_probability(&self, tokens: &[usize]) -> Result<f64> {
        Ok(self.token_probs(tokens)?.iter().product())
    }

    /// Samples one trajectory token by token.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let mut tokens = Vec::with_capacity(self.seq_len);
        for _ in 0..self.seq_len {
            let probs = self.state_probs(self.state_index(&tokens));
            let u: f64 = rng.random();
            let mut acc = 0.0;
            // rounding fallback: last token with nonzero probability
            let mut choice = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
            for (k, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    choice = k;
                    break;
                }
            }
            tokens.push(choice);
        }
        tokens
    }

    /// Every trajectory with its probability, in lexicographic order.
    pub fn distribution(&self) -> Vec<(Vec<usize>, f64)> {
        let mut out = Vec::new();
        let mut stack = vec![(Vec::new(), 1.0)];
        while let Some((prefix, p)) = stack.pop() {
            if prefix.len() == self.seq_len {
                out.push((prefix, p));
                continue;
            }
            let probs = self.state_probs(self.state_index(&prefix));
            for k in (0..self.vocab_size).rev() {
                let mut next = prefix.clone();
                next.push(k);
                stack.push((next, p * probs[k]));
            }
        }
        out
    }
}
