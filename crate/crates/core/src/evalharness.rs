//! Evaluation reports: classification metrics, warning sweeps and model
//! comparisons, as machine-readable records and aligned text tables.

use std::fmt::Write as _;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::classifier::{Backend, Classifier, ClassifierError, ModelArtifact};
use crate::corpus::{label_distribution, LabelCounts, Sentence, SplitRatios};
use crate::fingerprint::sentences_fingerprint;
use crate::label::SectionLabel;
use crate::metrics::{Averages, ClassMetrics, ClassificationReport};
use crate::warnings::{rates, sweep_many, Rates, WarningError, WarningTable, WarningThreshold};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("at least one threshold is required")]
    NoThresholds,
    #[error("threshold {0} is outside (0, 1)")]
    InvalidThreshold(f64),
    #[error("reports were computed on different test sets ({0} vs {1})")]
    FingerprintMismatch(String, String),
    #[error("warning counts are not monotone in the threshold")]
    NonMonotone,
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

impl From<WarningError> for EvalError {
    fn from(e: WarningError) -> Self {
        match e {
            WarningError::InvalidThreshold(t) => EvalError::InvalidThreshold(t),
            WarningError::EmptyTestSet => EvalError::EmptyTestSet,
            WarningError::Classifier(c) => EvalError::Classifier(c),
        }
    }
}

/// Report over argmax predictions of `model`.
pub fn classification_report(model: &impl Classifier, test: &[Sentence]) -> Result<ClassificationReport, EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let pairs = test
        .iter()
        .map(|s| Ok((s.label, model.predict(&s.text)?)))
        .collect::<Result<Vec<_>, ClassifierError>>()?;
    Ok(ClassificationReport::from_pairs(pairs))
}

/// Report for a stratified baseline: one seeded draw per test sentence.
pub fn baseline_report(model: &ModelArtifact, test: &[Sentence], seed: u64) -> Result<ClassificationReport, EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let sampler = model.baseline_sampler(seed)?;
    Ok(ClassificationReport::from_pairs(test.iter().map(|s| s.label).zip(sampler)))
}

/// Baseline artifacts are evaluated by sampling; everything else by argmax.
pub fn model_report(model: &ModelArtifact, test: &[Sentence]) -> Result<ClassificationReport, EvalError> {
    match model.backend() {
        Backend::Baseline => baseline_report(model, test, model.manifest().config.seed),
        _ => classification_report(model, test),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauReport {
    pub tau: WarningThreshold,
    pub table: WarningTable,
    pub rates: Rates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarningReport {
    pub test_size: usize,
    /// Sorted by ascending threshold.
    pub thresholds: Vec<TauReport>,
}

impl WarningReport {
    pub fn get(&self, tau: f64) -> Option<&TauReport> {
        self.thresholds.iter().find(|t| t.tau.value() == tau)
    }
}

pub fn warning_report(model: &impl Classifier, test: &[Sentence], taus: &[f64]) -> Result<WarningReport, EvalError> {
    if taus.is_empty() {
        return Err(EvalError::NoThresholds);
    }
    let mut taus = taus.iter().map(|&t| WarningThreshold::new(t)).collect::<Result<Vec<_>, _>>()?;
    taus.sort_by(|a, b| a.value().total_cmp(&b.value()));
    taus.dedup();
    let tables = sweep_many(model, test, &taus)?;
    if tables.windows(2).any(|w| w[0].warnings_issued() > w[1].warnings_issued()) {
        return Err(EvalError::NonMonotone);
    }
    Ok(WarningReport {
        test_size: test.len(),
        thresholds: taus.into_iter().zip(tables).map(|(tau, table)| TauReport { tau, table, rates: rates(&table) }).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDistributions {
    pub train: LabelCounts,
    pub validation: LabelCounts,
    pub test: LabelCounts,
}

impl SplitDistributions {
    pub fn new(train: &[Sentence], validation: &[Sentence], test: &[Sentence]) -> Self {
        Self { train: label_distribution(train), validation: label_distribution(validation), test: label_distribution(test) }
    }
}

/// Everything one evaluation run produced, with its inputs' fingerprints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRunRecord {
    pub model_id: String,
    pub model_fingerprint: String,
    pub backend: Backend,
    pub corpus_fingerprint: String,
    pub test_fingerprint: String,
    pub split_seed: u64,
    pub ratios: SplitRatios,
    pub classification: ClassificationReport,
    pub warnings: WarningReport,
    pub label_distribution: SplitDistributions,
    pub timestamp: DateTime<Utc>,
}

/// Inputs of [`evaluate`] other than the model.
pub struct EvalInputs<'a> {
    pub corpus_fingerprint: String,
    pub split_seed: u64,
    pub ratios: SplitRatios,
    pub train: &'a [Sentence],
    pub validation: &'a [Sentence],
    pub test: &'a [Sentence],
    pub taus: &'a [f64],
}

pub fn evaluate(model: &ModelArtifact, inputs: &EvalInputs) -> Result<EvalRunRecord, EvalError> {
    let classification = model_report(model, inputs.test)?;
    let warnings = warning_report(model, inputs.test, inputs.taus)?;
    Ok(EvalRunRecord {
        model_id: model.id(),
        model_fingerprint: model.fingerprint().to_string(),
        backend: model.backend(),
        corpus_fingerprint: inputs.corpus_fingerprint.clone(),
        test_fingerprint: sentences_fingerprint(inputs.test),
        split_seed: inputs.split_seed,
        ratios: inputs.ratios,
        classification,
        warnings,
        label_distribution: SplitDistributions::new(inputs.train, inputs.validation, inputs.test),
        timestamp: Utc::now(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub a: f64,
    pub b: f64,
    pub delta: f64,
}

impl MetricDelta {
    fn new(a: f64, b: f64) -> Self {
        Self { a, b, delta: b - a }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassComparison {
    pub label: SectionLabel,
    pub precision: MetricDelta,
    pub recall: MetricDelta,
    pub f1: MetricDelta,
    pub support: u64,
}

/// Side-by-side metrics; deltas are `b - a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub model_a: String,
    pub model_b: String,
    pub test_fingerprint: String,
    pub per_class: Vec<ClassComparison>,
    pub weighted_precision: MetricDelta,
    pub weighted_recall: MetricDelta,
    pub weighted_f1: MetricDelta,
    pub accuracy: MetricDelta,
}

pub fn compare_models(a: &EvalRunRecord, b: &EvalRunRecord) -> Result<ModelComparison, EvalError> {
    if a.test_fingerprint != b.test_fingerprint {
        return Err(EvalError::FingerprintMismatch(a.test_fingerprint.clone(), b.test_fingerprint.clone()));
    }
    let (ra, rb) = (&a.classification, &b.classification);
    Ok(ModelComparison {
        model_a: a.model_id.clone(),
        model_b: b.model_id.clone(),
        test_fingerprint: a.test_fingerprint.clone(),
        per_class: compare_classes(&ra.per_class, &rb.per_class),
        weighted_precision: MetricDelta::new(ra.weighted.precision, rb.weighted.precision),
        weighted_recall: MetricDelta::new(ra.weighted.recall, rb.weighted.recall),
        weighted_f1: MetricDelta::new(ra.weighted.f1, rb.weighted.f1),
        accuracy: MetricDelta::new(ra.accuracy, rb.accuracy),
    })
}

fn compare_classes(a: &[ClassMetrics], b: &[ClassMetrics]) -> Vec<ClassComparison> {
    a.iter()
        .zip(b)
        .map(|(x, y)| ClassComparison {
            label: x.label,
            precision: MetricDelta::new(x.precision, y.precision),
            recall: MetricDelta::new(x.recall, y.recall),
            f1: MetricDelta::new(x.f1, y.f1),
            support: x.support,
        })
        .collect()
}

const LABEL_WIDTH: usize = 18;

fn metric_cell(value: f64, undefined: bool) -> String {
    format!("{:.4}{}", value, if undefined { "*" } else { " " })
}

/// Aligned plain-text rendering of a classification report.
pub fn render_classification(report: &ClassificationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<LABEL_WIDTH$} {:>10} {:>10} {:>10} {:>8}", "label", "precision", "recall", "f1", "support");
    let mut flagged = false;
    for m in &report.per_class {
        flagged |= m.precision_undefined || m.recall_undefined || m.f1_undefined;
        let _ = writeln!(
            out,
            "{:<LABEL_WIDTH$} {:>10} {:>10} {:>10} {:>8}",
            m.label.heading(),
            metric_cell(m.precision, m.precision_undefined),
            metric_cell(m.recall, m.recall_undefined),
            metric_cell(m.f1, m.f1_undefined),
            m.support
        );
    }
    let Averages { precision, recall, f1 } = report.weighted;
    let _ = writeln!(
        out,
        "{:<LABEL_WIDTH$} {:>10} {:>10} {:>10} {:>8}",
        "weighted avg",
        metric_cell(precision, false),
        metric_cell(recall, false),
        metric_cell(f1, false),
        report.total
    );
    let _ = writeln!(out, "{:<LABEL_WIDTH$} {:>10} {:>10} {:>10} {:>8}", "accuracy", "", "", metric_cell(report.accuracy, false), report.total);
    if flagged {
        let _ = writeln!(out, "* zero denominator, reported as 0");
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "confusion matrix (rows: predicted, columns: gold)");
    let _ = write!(out, "{:<LABEL_WIDTH$}", "");
    for l in SectionLabel::ALL {
        let _ = write!(out, " {:>18}", l.heading());
    }
    let _ = writeln!(out);
    for p in SectionLabel::ALL {
        let _ = write!(out, "{:<LABEL_WIDTH$}", p.heading());
        for g in SectionLabel::ALL {
            let _ = write!(out, " {:>18}", report.confusion.get(p, g));
        }
        let _ = writeln!(out);
    }
    out
}

fn rate_cell(r: Option<f64>) -> String {
    r.map_or_else(|| "n/a".to_string(), |v| format!("{:.2}%", 100.0 * v))
}

pub fn render_warnings(report: &WarningReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "sentences: {}  pairs: {}", report.test_size, report.test_size * crate::NUM_LABELS);
    let _ = writeln!(
        out,
        "{:>6} {:>11} {:>11} {:>11} {:>11} {:>9} {:>9}",
        "tau", "warn+wrong", "warn+right", "abst+wrong", "abst+right", "fp rate", "fn rate"
    );
    for t in &report.thresholds {
        let tb = &t.table;
        let _ = writeln!(
            out,
            "{:>6} {:>11} {:>11} {:>11} {:>11} {:>9} {:>9}",
            format!("{:.2}", t.tau.value()),
            tb.warn_when_should_warn,
            tb.warn_when_should_abstain,
            tb.abstain_when_should_warn,
            tb.abstain_when_should_abstain,
            rate_cell(t.rates.fp_rate),
            rate_cell(t.rates.fn_rate)
        );
    }
    out
}

pub fn render_comparison(c: &ModelComparison) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "a: {}\nb: {}", c.model_a, c.model_b);
    let _ = writeln!(out, "{:<LABEL_WIDTH$} {:>8} {:>8} {:>8}", "f1", "a", "b", "delta");
    let row = |out: &mut String, name: &str, d: &MetricDelta| {
        let _ = writeln!(out, "{:<LABEL_WIDTH$} {:>8.4} {:>8.4} {:>+8.4}", name, d.a, d.b, d.delta);
    };
    for cc in &c.per_class {
        row(&mut out, cc.label.heading(), &cc.f1);
    }
    row(&mut out, "weighted avg", &c.weighted_f1);
    row(&mut out, "accuracy", &c.accuracy);
    out
}
