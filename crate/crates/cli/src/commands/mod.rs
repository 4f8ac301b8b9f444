pub mod adjust;
pub mod analyze;
pub mod bench;
pub mod simulate;
pub mod synth;
