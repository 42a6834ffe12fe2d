//! Sentence classification over the six section labels.
//!
//! Three backends share one artifact type: a stratified random baseline, a
//! linear n-gram softmax model, and a slot for an externally provided
//! transformer fine-tuning adapter (not bundled).

mod baseline;
mod linear;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use baseline::{BaselineModel, BaselineSampler};
pub use linear::{tokenize, LinearModel, LinearParams};

use crate::corpus::{Sentence, SplitRatios};
use crate::distribution::LabelDistribution;
use crate::fingerprint::{sentences_fingerprint, sha256_hex};
use crate::label::{SectionLabel, NUM_LABELS};
use crate::metrics::weighted_f1;

/// Token limit of the transformer backend.
pub const TRANSFORMER_MAX_TOKENS: usize = 512;
const FORMAT_VERSION: u32 = 1;
const MANIFEST_FILE: &str = "manifest.json";
const VOCAB_FILE: &str = "vocab.txt";
const WEIGHTS_FILE: &str = "weights.bin";
const BASELINE_FILE: &str = "baseline.json";

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("backend `{0}` is not available in this build")]
    BackendUnavailable(Backend),
    #[error("input text is empty")]
    EmptyText,
    #[error("operation requires the {expected} backend, model is {found}")]
    WrongBackend { expected: Backend, found: Backend },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("model artifact: {0}")]
    Artifact(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Baseline,
    Linear,
    Transformer,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Baseline => "baseline",
            Backend::Linear => "linear",
            Backend::Transformer => "transformer",
        })
    }
}

impl std::str::FromStr for Backend {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Backend::Baseline),
            "linear" => Ok(Backend::Linear),
            "transformer" => Ok(Backend::Transformer),
            other => Err(ClassifierError::InvalidConfig(format!("unknown backend `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformerParams {
    pub model_name: String,
    pub max_tokens: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for TransformerParams {
    fn default() -> Self {
        Self { model_name: "roberta-base".into(), max_tokens: TRANSFORMER_MAX_TOKENS, learning_rate: 2e-5, batch_size: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub backend: Backend,
    pub epochs: usize,
    pub seed: u64,
    pub linear: LinearParams,
    pub transformer: TransformerParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Linear,
            epochs: 4,
            seed: 0,
            linear: LinearParams::default(),
            transformer: TransformerParams::default(),
        }
    }
}

impl TrainConfig {
    pub fn new(backend: Backend) -> Self {
        Self { backend, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.transformer.max_tokens == 0 || self.transformer.max_tokens > TRANSFORMER_MAX_TOKENS {
            return bad("transformer max_tokens must be in 1..=512");
        }
        let l = &self.linear;
        if !(l.learning_rate > 0.0 && l.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if l.ngram_min == 0 || l.ngram_min > l.ngram_max {
            return bad("n-gram range must satisfy 1 <= min <= max");
        }
        if l.max_tokens == 0 {
            return bad("max_tokens must be at least 1");
        }
        if !(l.l2 >= 0.0 && l.l2 * l.learning_rate < 1.0) {
            return bad("l2 must be non-negative and below 1/learning_rate");
        }
        Ok(())
    }
}

/// Anything that maps a sentence to a distribution over labels.
pub trait Classifier {
    fn predict_proba(&self, text: &str) -> Result<LabelDistribution, ClassifierError>;

    /// Argmax with ties resolved by canonical label order.
    fn predict(&self, text: &str) -> Result<SectionLabel, ClassifierError> {
        Ok(self.predict_proba(text)?.argmax())
    }
}

/// Where the training data came from; recorded for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub corpus_fingerprint: String,
    pub split_seed: u64,
    pub ratios: SplitRatios,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format_version: u32,
    pub backend: Backend,
    pub label_order: Vec<SectionLabel>,
    pub fingerprint: String,
    pub config: TrainConfig,
    pub train_data_hash: String,
    pub validation_data_hash: String,
    pub train_size: usize,
    pub validation_size: usize,
    /// Weighted F1 on the selection set after each epoch.
    pub epoch_scores: Vec<f64>,
    /// 1-based epoch of the returned checkpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_epoch: Option<usize>,
    /// `"validation"`, or `"train"` when no validation data was given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_set: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
enum Params {
    Baseline(BaselineModel),
    Linear(LinearModel),
}

/// A trained model. Immutable once built; prediction is read-only.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    manifest: ModelManifest,
    params: Params,
}

/// Index of the best score; the earliest wins ties.
pub fn select_best_epoch(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if best.is_none_or(|b| *s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

fn fingerprint_of(config: &TrainConfig, train_hash: &str, validation_hash: &str) -> String {
    let config_json = serde_json::to_string(config).expect("config serializes");
    sha256_hex(format!("{config_json}\n{train_hash}\n{validation_hash}").as_bytes())
}

/// Trains a model. The linear backend keeps the epoch checkpoint with the
/// best weighted F1 on `validation`, or on `train` when `validation` is empty.
pub fn train(train: &[Sentence], validation: &[Sentence], config: &TrainConfig) -> Result<ModelArtifact, ClassifierError> {
    config.validate()?;
    if train.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    let train_hash = sentences_fingerprint(train);
    let validation_hash = sentences_fingerprint(validation);
    let mut manifest = ModelManifest {
        format_version: FORMAT_VERSION,
        backend: config.backend,
        label_order: SectionLabel::ALL.to_vec(),
        fingerprint: fingerprint_of(config, &train_hash, &validation_hash),
        config: config.clone(),
        train_data_hash: train_hash,
        validation_data_hash: validation_hash,
        train_size: train.len(),
        validation_size: validation.len(),
        epoch_scores: Vec::new(),
        best_epoch: None,
        selection_set: None,
        provenance: None,
        num_features: None,
    };

    let params = match config.backend {
        Backend::Transformer => return Err(ClassifierError::BackendUnavailable(Backend::Transformer)),
        Backend::Baseline => Params::Baseline(BaselineModel::fit(train)),
        Backend::Linear => {
            let selection = if validation.is_empty() { train } else { validation };
            let mut best: Option<(f64, LinearModel)> = None;
            let mut scores = Vec::with_capacity(config.epochs);
            linear::fit(train, &config.linear, config.epochs, config.seed, |_, model| {
                let f1 = weighted_f1(selection.iter().map(|s| (s.label, model.predict_proba(&s.text).argmax())));
                scores.push(f1);
                if best.as_ref().is_none_or(|(b, _)| f1 > *b) {
                    best = Some((f1, model.clone()));
                }
            });
            manifest.best_epoch = select_best_epoch(&scores).map(|i| i + 1);
            manifest.epoch_scores = scores;
            manifest.selection_set = Some(if validation.is_empty() { "train" } else { "validation" }.into());
            let (_, model) = best.expect("at least one epoch ran");
            manifest.num_features = Some(model.num_features());
            Params::Linear(model)
        }
    };
    Ok(ModelArtifact { manifest, params })
}

impl ModelArtifact {
    pub fn manifest(&self) -> &ModelManifest {
        &self.manifest
    }

    pub fn backend(&self) -> Backend {
        self.manifest.backend
    }

    pub fn fingerprint(&self) -> &str {
        &self.manifest.fingerprint
    }

    /// Short identifier derived from the fingerprint.
    pub fn id(&self) -> String {
        format!("{}-{}", self.manifest.backend, &self.manifest.fingerprint[..12])
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.manifest.provenance = Some(provenance);
        self
    }

    /// Baseline built directly from label counts, e.g. for an empty store.
    pub fn from_baseline(model: BaselineModel) -> Self {
        let counts_json = serde_json::to_string(&model.counts).expect("counts serialize");
        let config = TrainConfig::new(Backend::Baseline);
        let manifest = ModelManifest {
            format_version: FORMAT_VERSION,
            backend: Backend::Baseline,
            label_order: SectionLabel::ALL.to_vec(),
            fingerprint: fingerprint_of(&config, &sha256_hex(counts_json.as_bytes()), ""),
            config,
            train_data_hash: sha256_hex(counts_json.as_bytes()),
            validation_data_hash: String::new(),
            train_size: model.counts.total(),
            validation_size: 0,
            epoch_scores: Vec::new(),
            best_epoch: None,
            selection_set: None,
            provenance: None,
            num_features: None,
        };
        Self { manifest, params: Params::Baseline(model) }
    }

    pub fn as_linear(&self) -> Option<&LinearModel> {
        match &self.params {
            Params::Linear(m) => Some(m),
            Params::Baseline(_) => None,
        }
    }

    pub fn as_baseline(&self) -> Option<&BaselineModel> {
        match &self.params {
            Params::Baseline(m) => Some(m),
            Params::Linear(_) => None,
        }
    }

    /// Seeded label sampler over the stored training frequencies.
    pub fn baseline_sampler(&self, seed: u64) -> Result<BaselineSampler, ClassifierError> {
        self.as_baseline().map(|b| b.sampler(seed)).ok_or(ClassifierError::WrongBackend {
            expected: Backend::Baseline,
            found: self.backend(),
        })
    }

    /// Writes `manifest.json` plus parameter files into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), ClassifierError> {
        let io = |e: std::io::Error| ClassifierError::Artifact(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        match &self.params {
            Params::Baseline(b) => {
                let json = serde_json::to_string_pretty(b).expect("baseline serializes");
                fs::write(dir.join(BASELINE_FILE), json + "\n").map_err(io)?;
            }
            Params::Linear(m) => {
                let mut vocab = m.features.join("\n");
                vocab.push('\n');
                fs::write(dir.join(VOCAB_FILE), vocab).map_err(io)?;
                let mut blob = Vec::with_capacity((m.weights.len() + NUM_LABELS) * 8);
                for v in m.bias.iter().chain(&m.weights) {
                    blob.extend_from_slice(&v.to_le_bytes());
                }
                fs::write(dir.join(WEIGHTS_FILE), blob).map_err(io)?;
            }
        }
        let manifest = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        fs::write(dir.join(MANIFEST_FILE), manifest + "\n").map_err(io)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, ClassifierError> {
        let read = |name: &str| {
            fs::read(dir.join(name)).map_err(|e| ClassifierError::Artifact(format!("{}: {e}", dir.join(name).display())))
        };
        let bad = |m: String| ClassifierError::Artifact(m);
        let manifest: ModelManifest =
            serde_json::from_slice(&read(MANIFEST_FILE)?).map_err(|e| bad(format!("manifest: {e}")))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {}", manifest.format_version)));
        }
        if manifest.label_order != SectionLabel::ALL {
            return Err(bad("label order differs from the canonical order".into()));
        }
        let params = match manifest.backend {
            Backend::Transformer => return Err(ClassifierError::BackendUnavailable(Backend::Transformer)),
            Backend::Baseline => Params::Baseline(
                serde_json::from_slice(&read(BASELINE_FILE)?).map_err(|e| bad(format!("baseline: {e}")))?,
            ),
            Backend::Linear => {
                let vocab = String::from_utf8(read(VOCAB_FILE)?).map_err(|e| bad(format!("vocabulary: {e}")))?;
                let features: Vec<String> = vocab.lines().map(str::to_string).collect();
                let blob = read(WEIGHTS_FILE)?;
                let expected = (features.len() + 1) * NUM_LABELS * 8;
                if blob.len() != expected {
                    return Err(bad(format!("weights blob has {} bytes, expected {expected}", blob.len())));
                }
                let values: Vec<f64> =
                    blob.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
                let mut bias = [0.0; NUM_LABELS];
                bias.copy_from_slice(&values[..NUM_LABELS]);
                Params::Linear(LinearModel::from_parts(
                    manifest.config.linear.clone(),
                    features,
                    values[NUM_LABELS..].to_vec(),
                    bias,
                ))
            }
        };
        Ok(Self { manifest, params })
    }
}

impl Classifier for ModelArtifact {
    fn predict_proba(&self, text: &str) -> Result<LabelDistribution, ClassifierError> {
        if text.trim().is_empty() {
            return Err(ClassifierError::EmptyText);
        }
        Ok(match &self.params {
            Params::Baseline(b) => b.distribution(),
            Params::Linear(m) => m.predict_proba(text),
        })
    }
}

impl<C: Classifier + ?Sized> Classifier for &C {
    fn predict_proba(&self, text: &str) -> Result<LabelDistribution, ClassifierError> {
        (**self).predict_proba(text)
    }
}

impl<C: Classifier + ?Sized> Classifier for std::sync::Arc<C> {
    fn predict_proba(&self, text: &str) -> Result<LabelDistribution, ClassifierError> {
        (**self).predict_proba(text)
    }
}

pub fn predict_proba(model: &impl Classifier, text: &str) -> Result<LabelDistribution, ClassifierError> {
    model.predict_proba(text)
}

pub fn predict(model: &impl Classifier, text: &str) -> Result<SectionLabel, ClassifierError> {
    model.predict(text)
}

/// One seeded draw from a baseline model's training frequencies.
pub fn sample_baseline(model: &ModelArtifact, rng_seed: u64) -> Result<SectionLabel, ClassifierError> {
    Ok(model.baseline_sampler(rng_seed)?.draw())
}
