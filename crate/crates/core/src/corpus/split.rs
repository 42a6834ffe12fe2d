//! Document-level train/validation/test partitioning.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Fractions of documents assigned to train, validation and test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.70, validation: 0.15, test: 0.15 }
    }
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self, CorpusError> {
        let r = Self { train, validation, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(CorpusError::InvalidRatios(parts));
        }
        Ok(())
    }

    /// Document counts for a corpus of `n` documents: train and validation
    /// get the floor of their share, test gets the remainder. Corpora with
    /// fewer than three documents go entirely to train.
    pub fn allocate(&self, n: usize) -> (usize, usize, usize) {
        if n < 3 {
            return (n, 0, 0);
        }
        // The epsilon absorbs representation error such as 100 * 0.7 = 69.999…
        let floor = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
        let train = floor(self.train).min(n);
        let validation = floor(self.validation).min(n - train);
        (train, validation, n - train - validation)
    }
}

impl std::str::FromStr for SplitRatios {
    type Err = CorpusError;

    /// Parses `"0.7,0.15,0.15"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CorpusError::InvalidRatios([f64::NAN; 3]))?;
        match parts[..] {
            [a, b, c] => Self::new(a, b, c),
            _ => Err(CorpusError::InvalidRatios([f64::NAN; 3])),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

impl std::str::FromStr for SplitName {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(SplitName::Train),
            "validation" | "val" | "dev" => Ok(SplitName::Validation),
            "test" => Ok(SplitName::Test),
            other => Err(CorpusError::UnknownSplit(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: BTreeSet<String>,
    pub validation: BTreeSet<String>,
    pub test: BTreeSet<String>,
    pub seed: u64,
    pub ratios: SplitRatios,
}

impl DatasetSplit {
    pub fn split_of(&self, doc_id: &str) -> Option<SplitName> {
        if self.train.contains(doc_id) {
            Some(SplitName::Train)
        } else if self.validation.contains(doc_id) {
            Some(SplitName::Validation)
        } else if self.test.contains(doc_id) {
            Some(SplitName::Test)
        } else {
            None
        }
    }

    pub fn docs(&self, split: SplitName) -> &BTreeSet<String> {
        match split {
            SplitName::Train => &self.train,
            SplitName::Validation => &self.validation,
            SplitName::Test => &self.test,
        }
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }
}

/// Seeded document-basis split. Input order does not matter: ids are sorted
/// before shuffling.
pub fn make_splits<I, S>(doc_ids: I, seed: u64, ratios: SplitRatios) -> Result<DatasetSplit, CorpusError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    ratios.validate()?;
    let mut ids: Vec<String> = doc_ids.into_iter().map(|s| s.as_ref().to_string()).collect();
    if ids.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    ids.sort();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(CorpusError::DuplicateDocId(w[0].clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);

    let (n_train, n_val, _) = ratios.allocate(ids.len());
    let mut iter = ids.into_iter();
    let train = iter.by_ref().take(n_train).collect();
    let validation = iter.by_ref().take(n_val).collect();
    let test = iter.collect();
    Ok(DatasetSplit { train, validation, test, seed, ratios })
}
