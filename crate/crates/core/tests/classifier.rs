use std::collections::BTreeMap;

use casebrief_core::classifier::{
    predict, predict_proba, sample_baseline, train, Backend, BaselineModel, Classifier, ClassifierError, ModelArtifact,
    TrainConfig,
};
use casebrief_core::corpus::{LabelCounts, Sentence, Span};
use casebrief_core::metrics::weighted_f1;
use casebrief_core::{SectionLabel, NUM_LABELS};

fn sent(i: usize, label: SectionLabel, text: &str) -> Sentence {
    Sentence {
        sent_id: format!("toy-{i:03}"),
        doc_id: "toy".into(),
        label,
        text: text.into(),
        section: 0,
        char_span: Span::new(0, text.len()),
    }
}

const MARKERS: [&str; NUM_LABELS] = ["alpha", "bravo", "charlie", "delta", "echo", "foxtrot"];

/// Two sentences per label, each carrying its label's marker word.
fn separable() -> Vec<Sentence> {
    let mut out = Vec::new();
    for (i, label) in SectionLabel::ALL.into_iter().enumerate() {
        out.push(sent(2 * i, label, &format!("The {} appears here.", MARKERS[i])));
        out.push(sent(2 * i + 1, label, &format!("Once more {} shows up.", MARKERS[i])));
    }
    out
}

fn linear_config(seed: u64) -> TrainConfig {
    TrainConfig { seed, ..TrainConfig::new(Backend::Linear) }
}

#[test]
fn linear_separates_marker_words() {
    let data = separable();
    let model = train(&data, &[], &linear_config(1)).unwrap();
    let pairs: Vec<_> = data.iter().map(|s| (s.label, predict(&model, &s.text).unwrap())).collect();
    assert_eq!(weighted_f1(pairs), 1.0);
    let linear = model.as_linear().unwrap();
    for (i, label) in SectionLabel::ALL.into_iter().enumerate() {
        let own = linear.weight(MARKERS[i], label).unwrap();
        for other in SectionLabel::ALL.into_iter().filter(|l| *l != label) {
            assert!(own > linear.weight(MARKERS[i], other).unwrap());
        }
    }
    let m = model.manifest();
    assert_eq!(m.epoch_scores.len(), 4);
    assert_eq!(m.selection_set.as_deref(), Some("train"));
    assert!(m.best_epoch.unwrap() >= 1);
}

#[test]
fn training_is_deterministic() {
    let data = separable();
    let a = train(&data, &data[..4], &linear_config(9)).unwrap();
    let b = train(&data, &data[..4], &linear_config(9)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.fingerprint(), b.fingerprint());
    let c = train(&data, &data[..4], &linear_config(10)).unwrap();
    assert_ne!(a.fingerprint(), c.fingerprint());
}

/// Reads the saved files and recomputes the distribution without the
/// library's featurizer.
fn oracle_proba(dir: &std::path::Path, text: &str) -> [f64; NUM_LABELS] {
    let vocab: Vec<String> = std::fs::read_to_string(dir.join("vocab.txt")).unwrap().lines().map(String::from).collect();
    let index: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, f)| (f.as_str(), i)).collect();
    let blob = std::fs::read(dir.join("weights.bin")).unwrap();
    let values: Vec<f64> = blob.chunks(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let (bias, weights) = values.split_at(NUM_LABELS);

    let lower = text.to_lowercase();
    let tokens: Vec<&str> = lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).collect();
    let mut grams: Vec<String> = tokens.iter().map(|t| t.to_string()).collect();
    grams.extend(tokens.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    let mut tf: BTreeMap<usize, f64> = BTreeMap::new();
    for g in &grams {
        if let Some(&i) = index.get(g.as_str()) {
            *tf.entry(i).or_default() += 1.0;
        }
    }
    let x: Vec<(usize, f64)> = tf.into_iter().map(|(i, n)| (i, 1.0 + n.ln())).collect();
    let norm = x.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
    let mut z = [0.0; NUM_LABELS];
    for k in 0..NUM_LABELS {
        z[k] = bias[k] + x.iter().map(|(i, v)| weights[i * NUM_LABELS + k] * v / norm).sum::<f64>();
    }
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    std::array::from_fn(|k| e[k] / s)
}

#[test]
fn saved_linear_model_matches_independent_softmax() {
    let data = separable();
    let model = train(&data, &[], &linear_config(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    model.save(dir.path()).unwrap();
    for text in ["The alpha appears here.", "echo echo and bravo", "Once more delta shows up alpha."] {
        let got = predict_proba(&model, text).unwrap();
        let want = oracle_proba(dir.path(), text);
        for k in 0..NUM_LABELS {
            assert!((got.probs()[k] - want[k]).abs() < 1e-12);
        }
    }
}

#[test]
fn save_load_round_trip_is_bit_identical() {
    let data = separable();
    let dir = tempfile::tempdir().unwrap();
    for model in [train(&data, &data[..2], &linear_config(5)).unwrap(), train(&data, &[], &TrainConfig::new(Backend::Baseline)).unwrap()] {
        model.save(dir.path()).unwrap();
        let back = ModelArtifact::load(dir.path()).unwrap();
        assert_eq!(back, model);
        for s in &data {
            let a = model.predict_proba(&s.text).unwrap();
            let b = back.predict_proba(&s.text).unwrap();
            assert_eq!(a.probs().map(f64::to_bits), b.probs().map(f64::to_bits));
        }
        let before = std::fs::read(dir.path().join("manifest.json")).unwrap();
        back.save(dir.path()).unwrap();
        assert_eq!(std::fs::read(dir.path().join("manifest.json")).unwrap(), before);
    }
}

#[test]
fn baseline_predicts_training_frequencies() {
    let mut data = separable();
    data.push(sent(99, SectionLabel::Facts, "Extra facts sentence."));
    let model = train(&data, &[], &TrainConfig::new(Backend::Baseline)).unwrap();
    let d = model.predict_proba("anything at all").unwrap();
    assert!((d.prob(SectionLabel::Facts) - 3.0 / 13.0).abs() < 1e-12);
    assert!((d.prob(SectionLabel::Rule) - 2.0 / 13.0).abs() < 1e-12);
    assert_eq!(d.argmax(), SectionLabel::Facts);
}

#[test]
fn uniform_baseline_draws_are_balanced() {
    let model = ModelArtifact::from_baseline(BaselineModel { counts: LabelCounts([5; NUM_LABELS]) });
    let mut counts = [0usize; NUM_LABELS];
    for label in model.baseline_sampler(2024).unwrap().take(60_000) {
        counts[label.index()] += 1;
    }
    // 3 standard deviations of a Binomial(60000, 1/6).
    let sigma3 = 3.0 * (60_000.0f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
    for c in counts {
        assert!((c as f64 - 10_000.0).abs() <= sigma3, "{counts:?}");
    }
    assert_eq!(sample_baseline(&model, 4).unwrap(), sample_baseline(&model, 4).unwrap());
}

#[test]
fn error_cases() {
    assert!(matches!(train(&[], &[], &linear_config(1)), Err(ClassifierError::EmptyTrainingSet)));
    assert!(matches!(
        train(&separable(), &[], &TrainConfig::new(Backend::Transformer)),
        Err(ClassifierError::BackendUnavailable(Backend::Transformer))
    ));
    let model = train(&separable(), &[], &linear_config(1)).unwrap();
    assert!(matches!(model.predict_proba("   "), Err(ClassifierError::EmptyText)));
    assert!(matches!(model.baseline_sampler(1), Err(ClassifierError::WrongBackend { .. })));
    let bad = TrainConfig { epochs: 0, ..linear_config(1) };
    assert!(matches!(train(&separable(), &[], &bad), Err(ClassifierError::InvalidConfig(_))));
    let empty = tempfile::tempdir().unwrap();
    assert!(matches!(ModelArtifact::load(empty.path()), Err(ClassifierError::Artifact(_))));
}

#[test]
fn unknown_words_fall_back_to_bias() {
    let model = train(&separable(), &[], &linear_config(1)).unwrap();
    let d = model.predict_proba("zzz qqq").unwrap();
    let bias = model.as_linear().unwrap().bias();
    let max = bias.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = bias.iter().map(|b| (b - max).exp()).collect();
    let s: f64 = e.iter().sum();
    for k in 0..NUM_LABELS {
        assert!((d.probs()[k] - e[k] / s).abs() < 1e-12);
    }
}
