//! Desk-scale multi-modal environment for studying mode collapse.
//!
//! A [`ToyEnvironment`] places a handful of rewarded modes in the space of
//! short token sequences, one of them favoured by the initial policy. The
//! [`train`] loop runs group-relative policy optimization on a tabular
//! [`ToyPolicy`], optionally with diversity-aware reward adjustment, and
//! reports how many modes the policy keeps visiting. [`ips_debias_check`]
//! measures the adjusted estimator against the uniform-measure reward
//! integral in the geometry where row sums equal duplicate counts.

mod env;
mod ips;
mod policy;
mod train;

pub use env::{EnvConfig, ToyEnvironment, OFF_MODE_DIMS};
pub use ips::{expected_distinct_reward, ips_debias_check, IpsConfig, IpsReport};
pub use policy::{ToyPolicy, MAX_ENUMERABLE};
pub use train::{
    evaluate, run_training, sample_group, train, write_metrics_csv, Algorithm, RunMetrics,
    SampledGroup, TrainConfig, TrainOutcome,
};

/// SplitMix64 finalizer over a combined seed.
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
