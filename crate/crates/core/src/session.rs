//! Proficiency-gated tutoring sessions.
//!
//! Each session is pinned to one document and one proficiency level. The
//! level decides which operations are available and which feedback the
//! learner receives:
//!
//! | level | operations |
//! |-------|------------|
//! | 1 | study an expert worked example |
//! | 2 | categorize expert-identified elements; mismatches reveal the expert label |
//! | 3 | annotate freely; the model warns about unlikely labels |
//! | 4 | annotate; the model suggests a label which the learner confirms or corrects |
//! | 5 | as level 4, plus whole-document highlighting by predicted section |
//!
//! Selections snap to whole sentences. Session state is plain data so it
//! can be persisted between requests; the document, model and worked
//! example are supplied per call through [`SessionContext`].

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::classifier::{Classifier, ClassifierError};
use crate::corpus::{CaseBrief, Span};
use crate::distribution::LabelDistribution;
use crate::label::{SectionLabel, NUM_LABELS};
use crate::warnings::{decide, WarningDecision, WarningThreshold};

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("{operation} is not available at level {level}")]
    LevelGateViolation { operation: Operation, level: ProficiencyLevel },
    #[error("proficiency level must be between 1 and 5, got {0}")]
    InvalidLevel(i64),
    #[error("unknown document `{0}`")]
    UnknownDocument(String),
    #[error("no worked example for document `{0}`")]
    NoWorkedExample(String),
    #[error("worked example has no element {0}")]
    UnknownElement(usize),
    #[error("span {start}..{end} is outside the document (length {len})")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },
    #[error("selection {start}..{end} does not cover any sentence")]
    EmptySelection { start: usize, end: usize },
    #[error("unknown annotation {0}")]
    UnknownAnnotation(u64),
    #[error("annotation {0} is already resolved")]
    AlreadyResolved(u64),
    #[error("annotation {0} was not suggested by the system")]
    NotASuggestion(u64),
    #[error("the brief has no confirmed or user annotations")]
    EmptyBrief,
    #[error("invalid worked example: {0}")]
    InvalidWorkedExample(String),
    #[error("invalid gating table: {0}")]
    InvalidGatingTable(String),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub enum ProficiencyLevel {
    FundamentalAwareness = 1,
    Novice = 2,
    Intermediate = 3,
    Advanced = 4,
    Expert = 5,
}

impl ProficiencyLevel {
    pub const ALL: [ProficiencyLevel; 5] = [
        ProficiencyLevel::FundamentalAwareness,
        ProficiencyLevel::Novice,
        ProficiencyLevel::Intermediate,
        ProficiencyLevel::Advanced,
        ProficiencyLevel::Expert,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            ProficiencyLevel::FundamentalAwareness => "Fundamental Awareness",
            ProficiencyLevel::Novice => "Novice",
            ProficiencyLevel::Intermediate => "Intermediate",
            ProficiencyLevel::Advanced => "Advanced",
            ProficiencyLevel::Expert => "Expert",
        }
    }
}

impl TryFrom<i64> for ProficiencyLevel {
    type Error = SessionError;

    fn try_from(v: i64) -> Result<Self, Self::Error> {
        match v {
            1..=5 => Ok(ProficiencyLevel::ALL[v as usize - 1]),
            _ => Err(SessionError::InvalidLevel(v)),
        }
    }
}

impl From<ProficiencyLevel> for u8 {
    fn from(l: ProficiencyLevel) -> u8 {
        l.number()
    }
}

impl std::fmt::Display for ProficiencyLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({})", self.number(), self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    GetWorkedExample,
    SubmitCategorization,
    SubmitAnnotation,
    SuggestCategory,
    ResolveSuggestion,
    HighlightDocument,
    ExportBrief,
}

impl Operation {
    pub const ALL: [Operation; 7] = [
        Operation::GetWorkedExample,
        Operation::SubmitCategorization,
        Operation::SubmitAnnotation,
        Operation::SuggestCategory,
        Operation::ResolveSuggestion,
        Operation::HighlightDocument,
        Operation::ExportBrief,
    ];
}

impl std::fmt::Display for Operation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).expect("operation serializes");
        f.write_str(s.as_str().expect("string variant"))
    }
}

/// Which operations each level may invoke.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<ProficiencyLevel, BTreeSet<Operation>>", into = "BTreeMap<ProficiencyLevel, BTreeSet<Operation>>")]
pub struct GatingTable {
    allowed: BTreeMap<ProficiencyLevel, BTreeSet<Operation>>,
}

impl Default for GatingTable {
    fn default() -> Self {
        use Operation::*;
        use ProficiencyLevel::*;
        let mut allowed = BTreeMap::new();
        allowed.insert(FundamentalAwareness, BTreeSet::from([GetWorkedExample]));
        allowed.insert(Novice, BTreeSet::from([SubmitCategorization]));
        allowed.insert(Intermediate, BTreeSet::from([SubmitAnnotation, ExportBrief]));
        allowed.insert(Advanced, BTreeSet::from([SubmitAnnotation, SuggestCategory, ResolveSuggestion, ExportBrief]));
        allowed.insert(
            Expert,
            BTreeSet::from([SubmitAnnotation, SuggestCategory, ResolveSuggestion, HighlightDocument, ExportBrief]),
        );
        Self { allowed }
    }
}

impl GatingTable {
    /// Custom table. Suggestions stay restricted to levels 4 and 5, and
    /// expert-element categorization to level 2.
    pub fn new(allowed: BTreeMap<ProficiencyLevel, BTreeSet<Operation>>) -> Result<Self, SessionError> {
        for (level, ops) in &allowed {
            for op in ops {
                let ok = match op {
                    Operation::SuggestCategory | Operation::ResolveSuggestion => *level >= ProficiencyLevel::Advanced,
                    Operation::SubmitCategorization => *level == ProficiencyLevel::Novice,
                    _ => true,
                };
                if !ok {
                    return Err(SessionError::InvalidGatingTable(format!("{op} cannot be enabled at level {level}")));
                }
            }
        }
        Ok(Self { allowed })
    }

    pub fn permits(&self, level: ProficiencyLevel, op: Operation) -> bool {
        self.allowed.get(&level).is_some_and(|ops| ops.contains(&op))
    }

    pub fn operations(&self, level: ProficiencyLevel) -> BTreeSet<Operation> {
        self.allowed.get(&level).cloned().unwrap_or_default()
    }
}

impl TryFrom<BTreeMap<ProficiencyLevel, BTreeSet<Operation>>> for GatingTable {
    type Error = SessionError;

    fn try_from(m: BTreeMap<ProficiencyLevel, BTreeSet<Operation>>) -> Result<Self, Self::Error> {
        Self::new(m)
    }
}

impl From<GatingTable> for BTreeMap<ProficiencyLevel, BTreeSet<Operation>> {
    fn from(g: GatingTable) -> Self {
        g.allowed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkedItem {
    pub span: Span,
    pub label: SectionLabel,
    pub explanation: String,
}

/// Expert annotations of one document with per-annotation explanations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkedExample {
    pub doc_id: String,
    pub items: Vec<WorkedItem>,
}

impl WorkedExample {
    pub fn from_json(json: &str) -> Result<Self, SessionError> {
        serde_json::from_str(json).map_err(|e| SessionError::InvalidWorkedExample(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, SessionError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| SessionError::InvalidWorkedExample(format!("{}: {e}", path.display())))?;
        Self::from_json(&json)
    }

    pub fn validate(&self, document: &CaseBrief) -> Result<(), SessionError> {
        if self.doc_id != document.doc_id {
            return Err(SessionError::InvalidWorkedExample(format!(
                "example is for `{}`, not `{}`",
                self.doc_id, document.doc_id
            )));
        }
        for (i, item) in self.items.iter().enumerate() {
            if item.explanation.trim().is_empty() {
                return Err(SessionError::InvalidWorkedExample(format!("item {i} has no explanation")));
            }
            if item.span.start >= item.span.end || document.text_at(item.span).is_none() {
                return Err(SessionError::InvalidWorkedExample(format!("item {i} span is outside the document")));
            }
        }
        Ok(())
    }
}

/// An expert element as shown at level 2: the span without its label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorizationElement {
    pub element_id: usize,
    pub span: Span,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationStatus {
    User,
    Suggested,
    Confirmed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: u64,
    /// Sentence-aligned span in the document body.
    pub span: Span,
    pub label: SectionLabel,
    pub status: AnnotationStatus,
    /// Label proposed by the model, for suggested or resolved suggestions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<SectionLabel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    ExpertReveal,
    Warning,
    SuggestionShown,
    Correction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Feedback {
    /// Level 2 mismatch: the expert's label is revealed.
    ExpertReveal {
        element_id: usize,
        submitted: SectionLabel,
        expert_label: SectionLabel,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        explanation: Option<String>,
    },
    /// Level 3: the chosen label is unlikely under the model.
    Warning { annotation_id: u64, assigned_label: SectionLabel, prob_assigned: f64, tau: WarningThreshold },
    SuggestionShown { annotation_id: u64, predicted: SectionLabel, distribution: LabelDistribution },
    /// Either a level 2 match against the expert label, or a learner's
    /// correction of a suggested label.
    Correction {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        element_id: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        annotation_id: Option<u64>,
        reference: SectionLabel,
        submitted: SectionLabel,
        matched: bool,
    },
}

impl Feedback {
    pub fn kind(&self) -> FeedbackKind {
        match self {
            Feedback::ExpertReveal { .. } => FeedbackKind::ExpertReveal,
            Feedback::Warning { .. } => FeedbackKind::Warning,
            Feedback::SuggestionShown { .. } => FeedbackKind::SuggestionShown,
            Feedback::Correction { .. } => FeedbackKind::Correction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    #[serde(flatten)]
    pub feedback: Feedback,
    pub timestamp: DateTime<Utc>,
}

impl FeedbackEvent {
    fn now(feedback: Feedback) -> Self {
        Self { feedback, timestamp: Utc::now() }
    }

    pub fn kind(&self) -> FeedbackKind {
        self.feedback.kind()
    }
}

/// Display record for level 5 highlighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Highlight {
    pub span: Span,
    pub label: SectionLabel,
    /// Maximum probability of the sentence's distribution, in `[1/6, 1]`.
    pub confidence: f64,
    /// Confidence mapped linearly from `[1/6, 1]` onto `[0, 1]`.
    pub intensity: f64,
}

pub fn confidence_intensity(confidence: f64) -> f64 {
    let floor = 1.0 / NUM_LABELS as f64;
    ((confidence - floor) / (1.0 - floor)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub annotation_id: u64,
    pub span: Span,
    pub label: SectionLabel,
    pub distribution: LabelDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationOutcome {
    pub annotation: Annotation,
    /// Present only at level 3.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<WarningDecision>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", content = "label", rename_all = "snake_case")]
pub enum Resolution {
    Confirm,
    Correct(SectionLabel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extract {
    pub annotation_id: u64,
    pub span: Span,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedSection {
    pub label: SectionLabel,
    pub heading: String,
    pub extracts: Vec<Extract>,
}

/// A case brief assembled from a session: always six sections in
/// canonical order, each extract carrying its source span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedBrief {
    pub doc_id: String,
    pub title: String,
    pub sections: Vec<ExportedSection>,
}

/// Per-call dependencies of a session.
pub struct SessionContext<'a> {
    pub document: &'a CaseBrief,
    pub model: &'a dyn Classifier,
    pub worked_example: Option<&'a WorkedExample>,
    pub gates: &'a GatingTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub user_id: String,
    pub level: ProficiencyLevel,
    pub doc_id: String,
    pub tau: WarningThreshold,
    /// Model override; `None` uses the deployment's active model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    /// Whether level 2 reveals also carry the expert's explanation.
    #[serde(default)]
    pub reveal_explanations: bool,
    pub annotations: Vec<Annotation>,
    pub feedback: Vec<FeedbackEvent>,
    next_annotation_id: u64,
    pub created_at: DateTime<Utc>,
}

/// Creates an empty session after checking the level and the document.
pub fn create_session<'a>(
    session_id: impl Into<String>,
    user_id: impl Into<String>,
    level: i64,
    doc_id: &str,
    lookup: impl FnOnce(&str) -> Option<&'a CaseBrief>,
) -> Result<Session, SessionError> {
    let level = ProficiencyLevel::try_from(level)?;
    let doc = lookup(doc_id).ok_or_else(|| SessionError::UnknownDocument(doc_id.to_string()))?;
    Ok(Session::new(session_id, user_id, level, doc))
}

impl Session {
    pub fn new(session_id: impl Into<String>, user_id: impl Into<String>, level: ProficiencyLevel, document: &CaseBrief) -> Self {
        Self {
            session_id: session_id.into(),
            user_id: user_id.into(),
            level,
            doc_id: document.doc_id.clone(),
            tau: WarningThreshold::DEFAULT,
            model_id: None,
            reveal_explanations: false,
            annotations: Vec::new(),
            feedback: Vec::new(),
            next_annotation_id: 1,
            created_at: Utc::now(),
        }
    }

    pub fn with_tau(mut self, tau: WarningThreshold) -> Self {
        self.tau = tau;
        self
    }

    /// Changes the level. Pending suggestions are dropped when the new
    /// level no longer supports them.
    pub fn reconfigure_level(&mut self, level: ProficiencyLevel) {
        self.level = level;
        if level < ProficiencyLevel::Advanced {
            self.annotations.retain(|a| a.status != AnnotationStatus::Suggested);
        }
    }

    pub fn check_gate(&self, op: Operation, gates: &GatingTable) -> Result<(), SessionError> {
        if gates.permits(self.level, op) {
            Ok(())
        } else {
            Err(SessionError::LevelGateViolation { operation: op, level: self.level })
        }
    }

    pub fn annotation(&self, id: u64) -> Option<&Annotation> {
        self.annotations.iter().find(|a| a.id == id)
    }

    fn worked<'c>(&self, ctx: &SessionContext<'c>) -> Result<&'c WorkedExample, SessionError> {
        ctx.worked_example
            .filter(|w| w.doc_id == self.doc_id)
            .ok_or_else(|| SessionError::NoWorkedExample(self.doc_id.clone()))
    }

    pub fn get_worked_example(&self, ctx: &SessionContext) -> Result<WorkedExample, SessionError> {
        self.check_gate(Operation::GetWorkedExample, ctx.gates)?;
        Ok(self.worked(ctx)?.clone())
    }

    /// The expert elements a level 2 learner is asked to categorize.
    pub fn categorization_elements(&self, ctx: &SessionContext) -> Result<Vec<CategorizationElement>, SessionError> {
        self.check_gate(Operation::SubmitCategorization, ctx.gates)?;
        let worked = self.worked(ctx)?;
        Ok(worked
            .items
            .iter()
            .enumerate()
            .map(|(element_id, item)| CategorizationElement {
                element_id,
                span: item.span,
                text: ctx.document.text_at(item.span).unwrap_or_default().to_string(),
            })
            .collect())
    }

    pub fn submit_categorization(
        &mut self,
        ctx: &SessionContext,
        element_id: usize,
        label: SectionLabel,
    ) -> Result<FeedbackEvent, SessionError> {
        self.check_gate(Operation::SubmitCategorization, ctx.gates)?;
        let item = self.worked(ctx)?.items.get(element_id).ok_or(SessionError::UnknownElement(element_id))?;
        let feedback = if item.label == label {
            Feedback::Correction { element_id: Some(element_id), annotation_id: None, reference: item.label, submitted: label, matched: true }
        } else {
            Feedback::ExpertReveal {
                element_id,
                submitted: label,
                expert_label: item.label,
                explanation: self.reveal_explanations.then(|| item.explanation.clone()),
            }
        };
        let event = FeedbackEvent::now(feedback);
        self.feedback.push(event.clone());
        Ok(event)
    }

    fn new_annotation(&mut self, span: Span, label: SectionLabel, status: AnnotationStatus, predicted: Option<SectionLabel>) -> Annotation {
        let a = Annotation { id: self.next_annotation_id, span, label, status, predicted };
        self.next_annotation_id += 1;
        self.annotations.push(a.clone());
        a
    }

    /// Stores a learner annotation. At level 3 the label is checked against
    /// the model and a warning is logged when it is unlikely; the annotation
    /// is kept either way.
    pub fn submit_annotation(
        &mut self,
        ctx: &SessionContext,
        selection: Span,
        label: SectionLabel,
    ) -> Result<AnnotationOutcome, SessionError> {
        self.check_gate(Operation::SubmitAnnotation, ctx.gates)?;
        let (span, text) = snap_selection(ctx.document, selection)?;
        let warning = if self.level == ProficiencyLevel::Intermediate {
            let distribution = ctx.model.predict_proba(&text)?;
            Some(decide(&distribution, label, self.tau))
        } else {
            None
        };
        let annotation = self.new_annotation(span, label, AnnotationStatus::User, None);
        if let Some(w) = warning.filter(WarningDecision::is_warn) {
            self.feedback.push(FeedbackEvent::now(Feedback::Warning {
                annotation_id: annotation.id,
                assigned_label: label,
                prob_assigned: w.prob_assigned,
                tau: w.tau,
            }));
        }
        Ok(AnnotationOutcome { annotation, warning })
    }

    pub fn suggest_category(&mut self, ctx: &SessionContext, selection: Span) -> Result<Suggestion, SessionError> {
        self.check_gate(Operation::SuggestCategory, ctx.gates)?;
        let (span, text) = snap_selection(ctx.document, selection)?;
        let distribution = ctx.model.predict_proba(&text)?;
        let label = distribution.argmax();
        let annotation = self.new_annotation(span, label, AnnotationStatus::Suggested, Some(label));
        self.feedback.push(FeedbackEvent::now(Feedback::SuggestionShown {
            annotation_id: annotation.id,
            predicted: label,
            distribution,
        }));
        Ok(Suggestion { annotation_id: annotation.id, span, label, distribution })
    }

    pub fn resolve_suggestion(
        &mut self,
        ctx: &SessionContext,
        annotation_id: u64,
        resolution: Resolution,
    ) -> Result<&Annotation, SessionError> {
        self.check_gate(Operation::ResolveSuggestion, ctx.gates)?;
        let idx = self
            .annotations
            .iter()
            .position(|a| a.id == annotation_id)
            .ok_or(SessionError::UnknownAnnotation(annotation_id))?;
        let a = &self.annotations[idx];
        match (a.status, a.predicted) {
            (AnnotationStatus::Suggested, _) => {}
            (AnnotationStatus::Confirmed, Some(_)) => return Err(SessionError::AlreadyResolved(annotation_id)),
            _ => return Err(SessionError::NotASuggestion(annotation_id)),
        }
        let predicted = a.label;
        if let Resolution::Correct(label) = resolution {
            self.annotations[idx].label = label;
            self.feedback.push(FeedbackEvent::now(Feedback::Correction {
                element_id: None,
                annotation_id: Some(annotation_id),
                reference: predicted,
                submitted: label,
                matched: label == predicted,
            }));
        }
        self.annotations[idx].status = AnnotationStatus::Confirmed;
        Ok(&self.annotations[idx])
    }

    pub fn highlight_document(&self, ctx: &SessionContext) -> Result<Vec<Highlight>, SessionError> {
        self.check_gate(Operation::HighlightDocument, ctx.gates)?;
        highlight_units(ctx.document, ctx.model)
    }

    /// Confirmed and user annotations grouped by label, in document order.
    pub fn brief_draft(&self) -> BTreeMap<SectionLabel, Vec<&Annotation>> {
        let mut draft: BTreeMap<SectionLabel, Vec<&Annotation>> = BTreeMap::new();
        for a in self.annotations.iter().filter(|a| a.status != AnnotationStatus::Suggested) {
            draft.entry(a.label).or_default().push(a);
        }
        for list in draft.values_mut() {
            list.sort_by_key(|a| (a.span, a.id));
        }
        draft
    }

    pub fn export_brief(&self, ctx: &SessionContext) -> Result<ExportedBrief, SessionError> {
        self.check_gate(Operation::ExportBrief, ctx.gates)?;
        let draft = self.brief_draft();
        if draft.is_empty() {
            return Err(SessionError::EmptyBrief);
        }
        let sections = SectionLabel::ALL
            .into_iter()
            .map(|label| ExportedSection {
                label,
                heading: label.heading().to_string(),
                extracts: draft
                    .get(&label)
                    .map(|list| {
                        list.iter()
                            .map(|a| Extract {
                                annotation_id: a.id,
                                span: a.span,
                                text: ctx.document.text_at(a.span).unwrap_or_default().to_string(),
                            })
                            .collect()
                    })
                    .unwrap_or_default(),
            })
            .collect();
        Ok(ExportedBrief { doc_id: ctx.document.doc_id.clone(), title: ctx.document.title.clone(), sections })
    }
}

/// Sentence-level text units of a document, in order: the brief's
/// sentences plus sentences of sections without a canonical label.
pub fn text_units(document: &CaseBrief) -> Vec<Span> {
    let mut units: Vec<Span> = document.sentences.iter().map(|s| document.sentence_span(s)).collect();
    for section in document.sections.iter().filter(|s| s.label.is_none()) {
        units.extend(crate::corpus::split_sentences(&section.text).into_iter().map(|s| s.shift(section.char_span.start)));
    }
    units.sort();
    units.dedup();
    units
}

/// Expands a selection to the whole sentences it touches. Returns the
/// covering span and the text to classify.
pub fn snap_selection(document: &CaseBrief, selection: Span) -> Result<(Span, String), SessionError> {
    let len = document.body.len();
    if selection.start >= selection.end || selection.end > len {
        return Err(SessionError::SpanOutOfBounds { start: selection.start, end: selection.end, len });
    }
    let covered: Vec<Span> = text_units(document).into_iter().filter(|u| u.overlaps(&selection)).collect();
    let (Some(first), Some(last)) = (covered.first(), covered.last()) else {
        return Err(SessionError::EmptySelection { start: selection.start, end: selection.end });
    };
    let text = covered
        .iter()
        .map(|u| &document.body[u.start..u.end])
        .collect::<Vec<_>>()
        .join(" ");
    Ok((Span::new(first.start, last.end), text))
}

fn highlight_units(document: &CaseBrief, model: &dyn Classifier) -> Result<Vec<Highlight>, SessionError> {
    text_units(document)
        .into_iter()
        .map(|span| {
            let d = model.predict_proba(&document.body[span.start..span.end])?;
            let confidence = d.max_prob();
            Ok(Highlight { span, label: d.argmax(), confidence, intensity: confidence_intensity(confidence) })
        })
        .collect()
}
