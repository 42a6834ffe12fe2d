use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::label::{SectionLabel, NUM_LABELS};

const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistributionError {
    #[error("probability for {0} is negative or not finite")]
    InvalidProbability(SectionLabel),
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("distribution is missing label {0}")]
    MissingLabel(SectionLabel),
}

/// A probability vector over the six labels, stored in canonical order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelDistribution([f64; NUM_LABELS]);

impl LabelDistribution {
    pub fn new(probs: [f64; NUM_LABELS]) -> Result<Self, DistributionError> {
        for (l, p) in SectionLabel::ALL.iter().zip(probs) {
            if !p.is_finite() || p < 0.0 {
                return Err(DistributionError::InvalidProbability(*l));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(DistributionError::NotNormalized(sum));
        }
        Ok(Self(probs))
    }

    pub fn uniform() -> Self {
        Self([1.0 / NUM_LABELS as f64; NUM_LABELS])
    }

    /// Point mass on one label.
    pub fn certain(label: SectionLabel) -> Self {
        let mut p = [0.0; NUM_LABELS];
        p[label.index()] = 1.0;
        Self(p)
    }

    /// Normalizes non-negative weights. Returns `None` when they sum to zero.
    pub fn from_weights(weights: [f64; NUM_LABELS]) -> Option<Self> {
        let sum: f64 = weights.iter().sum();
        if sum.is_nan() || sum <= 0.0 || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return None;
        }
        Some(Self(weights.map(|w| w / sum)))
    }

    /// Softmax of unnormalized class scores.
    pub fn from_scores(scores: [f64; NUM_LABELS]) -> Self {
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp = scores.map(|s| (s - max).exp());
        let sum: f64 = exp.iter().sum();
        Self(exp.map(|e| e / sum))
    }

    pub fn prob(&self, label: SectionLabel) -> f64 {
        self.0[label.index()]
    }

    pub fn probs(&self) -> &[f64; NUM_LABELS] {
        &self.0
    }

    /// Most probable label; ties go to the label earliest in canonical order.
    pub fn argmax(&self) -> SectionLabel {
        let mut best = 0;
        for i in 1..NUM_LABELS {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        SectionLabel::ALL[best]
    }

    pub fn max_prob(&self) -> f64 {
        self.0[self.argmax().index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (SectionLabel, f64)> + '_ {
        SectionLabel::ALL.into_iter().zip(self.0)
    }
}

impl Serialize for LabelDistribution {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(NUM_LABELS))?;
        for (l, p) in self.iter() {
            map.serialize_entry(l.as_str(), &p)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for LabelDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<SectionLabel, f64>::deserialize(deserializer)?;
        let mut probs = [0.0; NUM_LABELS];
        for l in SectionLabel::ALL {
            probs[l.index()] =
                *map.get(&l).ok_or_else(|| serde::de::Error::custom(DistributionError::MissingLabel(l)))?;
        }
        Self::new(probs).map_err(serde::de::Error::custom)
    }
}
