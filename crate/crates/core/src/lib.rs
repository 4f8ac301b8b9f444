//! Diversity-aware reward adjustment for group-relative policy optimization.
//!
//! Rewards within a group of sampled completions are reweighted by how much
//! each completion overlaps semantically with the rest of the group, measured
//! through a submodular mutual information over a cosine kernel. The crate
//! also carries the advantage and clipped-surrogate machinery, a toy
//! environment for studying mode collapse, and a correlation analyzer for
//! reward versus semantic distance.

pub mod adjust;
pub mod advantage;
pub mod analyzer;
pub mod error;
pub mod group;
pub mod rewards;
pub mod sim;
pub mod smi;

pub use adjust::{adjust_group, adjust_rewards, dra_weights, AdjustedGroup, DraWeights};
pub use advantage::{group_advantages, AdvantageMode, AdvantageVector, ClipConfig};
pub use error::{Error, Result};
pub use group::{validate_group, CompletionGroup, Embedding, SimilarityMatrix};
pub use smi::{cosine_similarity_matrix, SmiKind};
