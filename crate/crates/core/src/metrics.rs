//! Confusion matrices and precision/recall/F1 with support-weighted averages.

use serde::{Deserialize, Serialize};

use crate::label::{SectionLabel, NUM_LABELS};

/// `counts[predicted][gold]`: predicted labels on rows, gold on columns.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_LABELS]; NUM_LABELS],
}

impl ConfusionMatrix {
    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (SectionLabel, SectionLabel)>,
    {
        let mut m = Self::default();
        for (gold, predicted) in pairs {
            m.add(gold, predicted);
        }
        m
    }

    pub fn add(&mut self, gold: SectionLabel, predicted: SectionLabel) {
        self.counts[predicted.index()][gold.index()] += 1;
    }

    pub fn get(&self, predicted: SectionLabel, gold: SectionLabel) -> u64 {
        self.counts[predicted.index()][gold.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Row sum: how often `label` was predicted.
    pub fn predicted_count(&self, label: SectionLabel) -> u64 {
        self.counts[label.index()].iter().sum()
    }

    /// Column sum: gold support of `label`.
    pub fn gold_count(&self, label: SectionLabel) -> u64 {
        self.counts.iter().map(|row| row[label.index()]).sum()
    }

    pub fn correct(&self) -> u64 {
        (0..NUM_LABELS).map(|i| self.counts[i][i]).sum()
    }
}

/// Metrics for one label. A `*_undefined` flag marks a zero denominator;
/// the metric is then reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: SectionLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub precision_undefined: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub recall_undefined: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub f1_undefined: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub per_class: Vec<ClassMetrics>,
    pub weighted: Averages,
    pub accuracy: f64,
    pub total: u64,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

impl ClassificationReport {
    /// Every metric in the report is a function of the matrix alone.
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        let total = confusion.total();
        let per_class: Vec<ClassMetrics> = SectionLabel::ALL
            .into_iter()
            .map(|label| {
                let tp = confusion.get(label, label);
                let support = confusion.gold_count(label);
                let (precision, precision_undefined) = ratio(tp, confusion.predicted_count(label));
                let (recall, recall_undefined) = ratio(tp, support);
                let (f1, f1_undefined) = if precision + recall == 0.0 {
                    (0.0, true)
                } else {
                    (2.0 * precision * recall / (precision + recall), false)
                };
                ClassMetrics {
                    label,
                    precision,
                    recall,
                    f1,
                    support,
                    precision_undefined,
                    recall_undefined,
                    f1_undefined,
                }
            })
            .collect();

        let weighted = if total == 0 {
            Averages::default()
        } else {
            let w = |f: fn(&ClassMetrics) -> f64| {
                per_class.iter().map(|m| m.support as f64 * f(m)).sum::<f64>() / total as f64
            };
            Averages { precision: w(|m| m.precision), recall: w(|m| m.recall), f1: w(|m| m.f1) }
        };
        let (accuracy, _) = ratio(confusion.correct(), total);
        Self { per_class, weighted, accuracy, total, confusion }
    }

    /// `pairs` yields `(gold, predicted)`.
    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (SectionLabel, SectionLabel)>,
    {
        Self::from_confusion(ConfusionMatrix::from_pairs(pairs))
    }

    pub fn class(&self, label: SectionLabel) -> &ClassMetrics {
        &self.per_class[label.index()]
    }
}

/// Support-weighted F1 of `(gold, predicted)` pairs.
pub fn weighted_f1<I>(pairs: I) -> f64
where
    I: IntoIterator<Item = (SectionLabel, SectionLabel)>,
{
    ClassificationReport::from_pairs(pairs).weighted.f1
}
