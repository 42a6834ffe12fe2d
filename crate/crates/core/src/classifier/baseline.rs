//! Stratified baseline: the training label frequencies, for every input.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{label_distribution, LabelCounts, Sentence};
use crate::distribution::LabelDistribution;
use crate::label::SectionLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub counts: LabelCounts,
}

impl BaselineModel {
    pub fn fit(train: &[Sentence]) -> Self {
        Self { counts: label_distribution(train) }
    }

    /// Model with equal counts for every label.
    pub fn uniform() -> Self {
        Self { counts: LabelCounts([1; 6]) }
    }

    pub fn distribution(&self) -> LabelDistribution {
        LabelDistribution::from_weights(self.counts.0.map(|c| c as f64)).unwrap_or_else(LabelDistribution::uniform)
    }

    pub fn sampler(&self, seed: u64) -> BaselineSampler {
        BaselineSampler { counts: self.counts, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

/// Seeded stream of labels drawn in proportion to the training counts.
#[derive(Debug, Clone)]
pub struct BaselineSampler {
    counts: LabelCounts,
    rng: ChaCha8Rng,
}

impl BaselineSampler {
    pub fn draw(&mut self) -> SectionLabel {
        let total = self.counts.total() as u64;
        if total == 0 {
            return SectionLabel::ALL[self.rng.gen_range(0..SectionLabel::ALL.len())];
        }
        let mut ticket = self.rng.gen_range(0..total);
        for (label, n) in self.counts.iter() {
            if ticket < n as u64 {
                return label;
            }
            ticket -= n as u64;
        }
        unreachable!("ticket is below the total count")
    }
}

impl Iterator for BaselineSampler {
    type Item = SectionLabel;

    fn next(&mut self) -> Option<SectionLabel> {
        Some(self.draw())
    }
}
