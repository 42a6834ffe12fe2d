//! Multinomial logistic regression over word n-gram features.
//!
//! Features are word n-grams of lowercased alphanumeric tokens, weighted by
//! `1 + ln(tf)` and L2-normalized per sentence. Training is plain SGD on the
//! softmax cross-entropy with a seeded example order.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::distribution::LabelDistribution;
use crate::label::{SectionLabel, NUM_LABELS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearParams {
    pub learning_rate: f64,
    pub ngram_min: usize,
    pub ngram_max: usize,
    /// Inputs are truncated to this many tokens, keeping the head.
    pub max_tokens: usize,
    /// Minimum number of training sentences a feature must occur in.
    pub min_df: usize,
    pub l2: f64,
}

impl Default for LinearParams {
    fn default() -> Self {
        Self { learning_rate: 0.5, ngram_min: 1, ngram_max: 2, max_tokens: 512, min_df: 1, l2: 0.0 }
    }
}

pub fn tokenize(text: &str, max_tokens: usize) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .take(max_tokens)
        .map(str::to_lowercase)
        .collect()
}

pub(crate) fn ngrams(tokens: &[String], min: usize, max: usize) -> Vec<String> {
    let mut out = Vec::new();
    for n in min.max(1)..=max {
        if n > tokens.len() {
            break;
        }
        out.extend(tokens.windows(n).map(|w| w.join(" ")));
    }
    out
}

/// Sparse feature vector, sorted by feature index.
pub(crate) type Features = Vec<(u32, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub(crate) params: LinearParams,
    /// Feature string -> row index. Rows are assigned in sorted order.
    pub(crate) vocab: HashMap<String, u32>,
    pub(crate) features: Vec<String>,
    /// Row-major `features.len() x NUM_LABELS`.
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: [f64; NUM_LABELS],
}

impl LinearModel {
    pub(crate) fn new(params: LinearParams, features: Vec<String>) -> Self {
        let vocab = features.iter().enumerate().map(|(i, f)| (f.clone(), i as u32)).collect();
        let weights = vec![0.0; features.len() * NUM_LABELS];
        Self { params, vocab, features, weights, bias: [0.0; NUM_LABELS] }
    }

    pub(crate) fn from_parts(
        params: LinearParams,
        features: Vec<String>,
        weights: Vec<f64>,
        bias: [f64; NUM_LABELS],
    ) -> Self {
        let mut m = Self::new(params, features);
        m.weights = weights;
        m.bias = bias;
        m
    }

    pub fn params(&self) -> &LinearParams {
        &self.params
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.features
    }

    /// Weight of an n-gram feature for one label, if the feature is known.
    pub fn weight(&self, feature: &str, label: SectionLabel) -> Option<f64> {
        let row = *self.vocab.get(feature)? as usize;
        Some(self.weights[row * NUM_LABELS + label.index()])
    }

    pub fn bias(&self) -> &[f64; NUM_LABELS] {
        &self.bias
    }

    pub(crate) fn featurize(&self, text: &str) -> Features {
        let tokens = tokenize(text, self.params.max_tokens);
        let mut tf: BTreeMap<u32, u32> = BTreeMap::new();
        for g in ngrams(&tokens, self.params.ngram_min, self.params.ngram_max) {
            if let Some(&idx) = self.vocab.get(&g) {
                *tf.entry(idx).or_default() += 1;
            }
        }
        let mut feats: Features = tf.into_iter().map(|(i, n)| (i, 1.0 + (n as f64).ln())).collect();
        let norm = feats.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, v) in &mut feats {
                *v /= norm;
            }
        }
        feats
    }

    pub(crate) fn scores(&self, feats: &Features) -> [f64; NUM_LABELS] {
        let mut scores = self.bias;
        for &(idx, v) in feats {
            let row = &self.weights[idx as usize * NUM_LABELS..(idx as usize + 1) * NUM_LABELS];
            for (s, w) in scores.iter_mut().zip(row) {
                *s += w * v;
            }
        }
        scores
    }

    /// Pre-softmax class scores for a text.
    pub fn class_scores(&self, text: &str) -> [f64; NUM_LABELS] {
        self.scores(&self.featurize(text))
    }

    pub fn predict_proba(&self, text: &str) -> LabelDistribution {
        LabelDistribution::from_scores(self.class_scores(text))
    }

    fn sgd_step(&mut self, feats: &Features, gold: SectionLabel, lr: f64) {
        let probs = LabelDistribution::from_scores(self.scores(feats));
        let mut grad = *probs.probs();
        grad[gold.index()] -= 1.0;
        let decay = 1.0 - lr * self.params.l2;
        for &(idx, v) in feats {
            let row = &mut self.weights[idx as usize * NUM_LABELS..(idx as usize + 1) * NUM_LABELS];
            for (w, g) in row.iter_mut().zip(grad) {
                *w = *w * decay - lr * g * v;
            }
        }
        for (b, g) in self.bias.iter_mut().zip(grad) {
            *b -= lr * g;
        }
    }
}

/// Builds the vocabulary from training sentences.
pub(crate) fn build_vocabulary(train: &[Sentence], params: &LinearParams) -> Vec<String> {
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for s in train {
        let tokens = tokenize(&s.text, params.max_tokens);
        let unique: BTreeSet<String> = ngrams(&tokens, params.ngram_min, params.ngram_max).into_iter().collect();
        for g in unique {
            *df.entry(g).or_default() += 1;
        }
    }
    df.into_iter().filter(|(_, n)| *n >= params.min_df.max(1)).map(|(g, _)| g).collect()
}

/// Runs SGD epochs, calling `on_epoch` after each with the current model.
pub(crate) fn fit<F>(train: &[Sentence], params: &LinearParams, epochs: usize, seed: u64, mut on_epoch: F) -> LinearModel
where
    F: FnMut(usize, &LinearModel),
{
    let mut model = LinearModel::new(params.clone(), build_vocabulary(train, params));
    let examples: Vec<(Features, SectionLabel)> = train.iter().map(|s| (model.featurize(&s.text), s.label)).collect();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (feats, gold) = &examples[i];
            model.sgd_step(feats, *gold, params.learning_rate);
        }
        on_epoch(epoch, &model);
    }
    model
}
