//! Threshold warnings on user-assigned labels.
//!
//! A warning is issued when the model's probability for the label the user
//! chose is strictly below the threshold; otherwise the engine abstains.

use serde::{Deserialize, Serialize};

use crate::classifier::{Classifier, ClassifierError};
use crate::corpus::Sentence;
use crate::distribution::LabelDistribution;
use crate::label::{SectionLabel, NUM_LABELS};

#[derive(Debug, thiserror::Error)]
pub enum WarningError {
    #[error("threshold {0} is outside (0, 1)")]
    InvalidThreshold(f64),
    #[error("test set is empty")]
    EmptyTestSet,
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct WarningThreshold(f64);

impl WarningThreshold {
    /// Threshold used for interactive sessions unless configured otherwise.
    pub const DEFAULT: WarningThreshold = WarningThreshold(0.05);
    pub const SWEEP: [WarningThreshold; 3] = [WarningThreshold(0.05), WarningThreshold(0.10), WarningThreshold(0.20)];

    pub fn new(tau: f64) -> Result<Self, WarningError> {
        if tau > 0.0 && tau < 1.0 {
            Ok(Self(tau))
        } else {
            Err(WarningError::InvalidThreshold(tau))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for WarningThreshold {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl TryFrom<f64> for WarningThreshold {
    type Error = WarningError;

    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<WarningThreshold> for f64 {
    fn from(t: WarningThreshold) -> f64 {
        t.0
    }
}

impl std::fmt::Display for WarningThreshold {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Warn,
    Abstain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarningDecision {
    pub decision: Decision,
    pub assigned_label: SectionLabel,
    pub prob_assigned: f64,
    pub tau: WarningThreshold,
}

impl WarningDecision {
    pub fn is_warn(&self) -> bool {
        self.decision == Decision::Warn
    }
}

/// Pure decision rule: warn iff `P(user_label) < tau`.
pub fn decide(distribution: &LabelDistribution, user_label: SectionLabel, tau: WarningThreshold) -> WarningDecision {
    let p = distribution.prob(user_label);
    WarningDecision {
        decision: if p < tau.value() { Decision::Warn } else { Decision::Abstain },
        assigned_label: user_label,
        prob_assigned: p,
        tau,
    }
}

pub fn check_assignment(
    model: &impl Classifier,
    text: &str,
    user_label: SectionLabel,
    tau: WarningThreshold,
) -> Result<WarningDecision, WarningError> {
    let d = model.predict_proba(text)?;
    Ok(decide(&d, user_label, tau))
}

/// Outcome counts over (sentence, candidate label) pairs. A pair should be
/// warned about iff the candidate differs from the gold label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarningTable {
    pub warn_when_should_warn: u64,
    pub warn_when_should_abstain: u64,
    pub abstain_when_should_warn: u64,
    pub abstain_when_should_abstain: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    /// Share of issued warnings that were wrong; `None` when none were issued.
    pub fp_rate: Option<f64>,
    /// Share of abstentions that missed a deserved warning; `None` when the
    /// engine never abstained.
    pub fn_rate: Option<f64>,
}

impl WarningTable {
    pub fn new(
        warn_when_should_warn: u64,
        warn_when_should_abstain: u64,
        abstain_when_should_warn: u64,
        abstain_when_should_abstain: u64,
    ) -> Self {
        Self { warn_when_should_warn, warn_when_should_abstain, abstain_when_should_warn, abstain_when_should_abstain }
    }

    pub fn record(&mut self, decision: Decision, should_warn: bool) {
        match (decision, should_warn) {
            (Decision::Warn, true) => self.warn_when_should_warn += 1,
            (Decision::Warn, false) => self.warn_when_should_abstain += 1,
            (Decision::Abstain, true) => self.abstain_when_should_warn += 1,
            (Decision::Abstain, false) => self.abstain_when_should_abstain += 1,
        }
    }

    pub fn warnings_issued(&self) -> u64 {
        self.warn_when_should_warn + self.warn_when_should_abstain
    }

    pub fn abstentions(&self) -> u64 {
        self.abstain_when_should_warn + self.abstain_when_should_abstain
    }

    /// Pairs that deserved a warning (one per wrong label per sentence).
    pub fn should_warn_total(&self) -> u64 {
        self.warn_when_should_warn + self.abstain_when_should_warn
    }

    /// Pairs that deserved silence (one per sentence).
    pub fn should_abstain_total(&self) -> u64 {
        self.warn_when_should_abstain + self.abstain_when_should_abstain
    }

    pub fn total(&self) -> u64 {
        self.warnings_issued() + self.abstentions()
    }
}

pub fn rates(table: &WarningTable) -> Rates {
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    Rates {
        fp_rate: ratio(table.warn_when_should_abstain, table.warnings_issued()),
        fn_rate: ratio(table.abstain_when_should_warn, table.abstentions()),
    }
}

/// Tallies every (sentence, label) pair of `test` at one threshold.
pub fn sweep_pairs(model: &impl Classifier, test: &[Sentence], tau: WarningThreshold) -> Result<WarningTable, WarningError> {
    Ok(sweep_many(model, test, &[tau])?.remove(0))
}

/// Like [`sweep_pairs`] for several thresholds, classifying each sentence once.
pub fn sweep_many(
    model: &impl Classifier,
    test: &[Sentence],
    taus: &[WarningThreshold],
) -> Result<Vec<WarningTable>, WarningError> {
    if test.is_empty() {
        return Err(WarningError::EmptyTestSet);
    }
    let mut tables = vec![WarningTable::default(); taus.len()];
    for s in test {
        let d = model.predict_proba(&s.text)?;
        for (table, &tau) in tables.iter_mut().zip(taus) {
            for candidate in SectionLabel::ALL {
                table.record(decide(&d, candidate, tau).decision, candidate != s.label);
            }
        }
    }
    debug_assert!(tables.iter().all(|t| t.total() == (test.len() * NUM_LABELS) as u64));
    Ok(tables)
}
