//! Core library for proficiency-adaptive case-brief tutoring.

pub mod classifier;
pub mod corpus;
pub mod distribution;
pub mod evalharness;
pub mod fingerprint;
pub mod label;
pub mod metrics;
pub mod session;
pub mod synth;
pub mod warnings;

pub use distribution::LabelDistribution;
pub use label::{SectionLabel, NUM_LABELS};
