//! Corpus ingestion: heading segmentation, sentence splitting, document
//! splits and the line-delimited record format.

mod headings;
mod sentences;
mod split;

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use headings::{normalize_heading_key, normalize_section_name, segment_brief, BriefSection, HeadingPatterns, SectionNameTable};
pub use sentences::{split_sentences, SentenceSplitter};
pub use split::{make_splits, DatasetSplit, SplitName, SplitRatios};

use crate::label::{SectionLabel, NUM_LABELS};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("no section headings found in document `{doc_id}`")]
    NoSectionsFound { doc_id: String },
    #[error("invalid split ratios {0:?}: must be non-negative and sum to 1")]
    InvalidRatios([f64; 3]),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("duplicate document id `{0}`")]
    DuplicateDocId(String),
    #[error("document `{0}` has an empty body")]
    EmptyBody(String),
    #[error("unknown split `{0}`")]
    UnknownSplit(String),
    #[error("heading pattern line {line}: {reason}")]
    InvalidPattern { line: usize, reason: String },
    #[error("section-name table line {line}: {reason}")]
    InvalidTable { line: usize, reason: String },
    #[error("record {line}: {reason}")]
    InvalidRecord { line: usize, reason: String },
    #[error("{0}")]
    Io(String),
}

/// Half-open byte range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn shift(&self, by: usize) -> Span {
        Span::new(self.start + by, self.end + by)
    }
}

/// A brief as it arrives from the source collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawBrief {
    pub doc_id: String,
    pub title: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub sent_id: String,
    pub doc_id: String,
    pub label: SectionLabel,
    pub text: String,
    /// Index into the owning brief's `sections`.
    pub section: usize,
    /// Byte offsets within the section text.
    pub char_span: Span,
}

/// An ingested brief: sections mapped to labels and sentence-segmented.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseBrief {
    pub doc_id: String,
    pub title: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitName>,
    pub sections: Vec<BriefSection>,
    pub sentences: Vec<Sentence>,
}

impl CaseBrief {
    /// Byte span of a sentence within `body`.
    pub fn sentence_span(&self, sentence: &Sentence) -> Span {
        sentence.char_span.shift(self.sections[sentence.section].char_span.start)
    }

    pub fn text_at(&self, span: Span) -> Option<&str> {
        self.body.get(span.start..span.end)
    }
}

/// Ingestion settings: heading patterns, name table and sentence splitter.
#[derive(Debug, Clone, Default)]
pub struct Ingestor {
    pub patterns: HeadingPatterns,
    pub names: SectionNameTable,
    pub splitter: SentenceSplitter,
}

impl Ingestor {
    pub fn with_patterns(patterns: HeadingPatterns) -> Self {
        Self { patterns, ..Self::default() }
    }

    /// Segments a raw brief into sections and sentences. Unmapped sections
    /// are kept for display but contribute no sentences.
    pub fn ingest(&self, raw: &RawBrief) -> Result<CaseBrief, CorpusError> {
        if raw.body.trim().is_empty() {
            return Err(CorpusError::EmptyBody(raw.doc_id.clone()));
        }
        let sections = segment_brief(raw, &self.patterns, &self.names)?;
        let sentences = build_sentences(&raw.doc_id, &sections, &self.splitter);
        Ok(CaseBrief {
            doc_id: raw.doc_id.clone(),
            title: raw.title.clone(),
            body: raw.body.clone(),
            split: None,
            sections,
            sentences,
        })
    }

    /// Like [`Ingestor::ingest`], but a body without recognizable headings
    /// becomes a single unlabeled section instead of an error. Used for
    /// opinions that learners annotate from scratch.
    pub fn ingest_document(&self, raw: &RawBrief) -> Result<CaseBrief, CorpusError> {
        match self.ingest(raw) {
            Err(CorpusError::NoSectionsFound { .. }) => {
                let start = raw.body.len() - raw.body.trim_start().len();
                let text = raw.body.trim();
                Ok(CaseBrief {
                    doc_id: raw.doc_id.clone(),
                    title: raw.title.clone(),
                    body: raw.body.clone(),
                    split: None,
                    sections: vec![BriefSection {
                        heading_raw: String::new(),
                        label: None,
                        text: text.to_string(),
                        char_span: Span::new(start, start + text.len()),
                    }],
                    sentences: Vec::new(),
                })
            }
            other => other,
        }
    }
}

fn build_sentences(doc_id: &str, sections: &[BriefSection], splitter: &SentenceSplitter) -> Vec<Sentence> {
    let mut out = Vec::new();
    for (idx, section) in sections.iter().enumerate() {
        let Some(label) = section.label else { continue };
        for span in splitter.split(&section.text) {
            out.push(Sentence {
                sent_id: format!("{doc_id}-{:03}", out.len()),
                doc_id: doc_id.to_string(),
                label,
                text: section.text[span.start..span.end].to_string(),
                section: idx,
                char_span: span,
            });
        }
    }
    out
}

/// Sentence counts per label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LabelCounts(pub [usize; NUM_LABELS]);

impl LabelCounts {
    pub fn get(&self, label: SectionLabel) -> usize {
        self.0[label.index()]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (SectionLabel, usize)> + '_ {
        SectionLabel::ALL.into_iter().map(|l| (l, self.get(l)))
    }
}

impl Serialize for LabelCounts {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(NUM_LABELS))?;
        for (label, n) in self.iter() {
            map.serialize_entry(label.as_str(), &n)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for LabelCounts {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<SectionLabel, usize>::deserialize(deserializer)?;
        let mut counts = [0; NUM_LABELS];
        for (l, n) in map {
            counts[l.index()] = n;
        }
        Ok(LabelCounts(counts))
    }
}

pub fn label_distribution<'a, I>(sentences: I) -> LabelCounts
where
    I: IntoIterator<Item = &'a Sentence>,
{
    let mut counts = [0; NUM_LABELS];
    for s in sentences {
        counts[s.label.index()] += 1;
    }
    LabelCounts(counts)
}

/// On-disk record; accepts both the raw and the processed shapes.
#[derive(Debug, Clone, Deserialize)]
struct Record {
    doc_id: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    body: Option<String>,
    #[serde(default)]
    split: Option<SplitName>,
    #[serde(default)]
    sections: Option<Vec<RecordSection>>,
    #[serde(default)]
    sentences: Option<Vec<RecordSentence>>,
}

#[derive(Debug, Clone, Deserialize)]
struct RecordSection {
    heading_raw: String,
    label: Option<SectionLabel>,
    text: String,
    #[serde(default)]
    char_span: Option<Span>,
}

#[derive(Debug, Clone, Deserialize)]
struct RecordSentence {
    sent_id: String,
    label: SectionLabel,
    text: String,
    #[serde(default)]
    section: Option<usize>,
    #[serde(default)]
    char_span: Option<Span>,
}

/// A parsed corpus line: either raw text awaiting ingestion or an
/// already-processed brief.
#[derive(Debug, Clone, PartialEq)]
pub enum CorpusRecord {
    Raw(RawBrief),
    Processed(CaseBrief),
}

impl CorpusRecord {
    pub fn doc_id(&self) -> &str {
        match self {
            CorpusRecord::Raw(r) => &r.doc_id,
            CorpusRecord::Processed(b) => &b.doc_id,
        }
    }

    /// Parses one JSON record. `line` is only used in error messages.
    pub fn from_json(json: &str, line: usize) -> Result<Self, CorpusError> {
        let rec: Record =
            serde_json::from_str(json).map_err(|e| CorpusError::InvalidRecord { line, reason: e.to_string() })?;
        let invalid = |reason: String| CorpusError::InvalidRecord { line, reason };
        if rec.doc_id.trim().is_empty() {
            return Err(invalid("empty doc_id".into()));
        }
        match rec.sections {
            None => {
                let body = rec.body.ok_or_else(|| invalid("record has neither `body` nor `sections`".into()))?;
                if body.trim().is_empty() {
                    return Err(CorpusError::EmptyBody(rec.doc_id));
                }
                Ok(CorpusRecord::Raw(RawBrief { doc_id: rec.doc_id, title: rec.title, body }))
            }
            Some(sections) => {
                let brief = processed_brief(rec.doc_id, rec.title, rec.body, rec.split, sections, rec.sentences)
                    .map_err(invalid)?;
                Ok(CorpusRecord::Processed(brief))
            }
        }
    }
}

fn processed_brief(
    doc_id: String,
    title: String,
    body: Option<String>,
    split: Option<SplitName>,
    rec_sections: Vec<RecordSection>,
    rec_sentences: Option<Vec<RecordSentence>>,
) -> Result<CaseBrief, String> {
    let have_spans = body.is_some() && rec_sections.iter().all(|s| s.char_span.is_some());
    let (body, sections) = if have_spans {
        let body = body.unwrap();
        let mut sections = Vec::with_capacity(rec_sections.len());
        let mut prev_end = 0;
        for s in rec_sections {
            let span = s.char_span.unwrap();
            if span.start < prev_end || body.get(span.start..span.end) != Some(s.text.as_str()) {
                return Err(format!("section `{}` span does not match body", s.heading_raw));
            }
            prev_end = span.end;
            sections.push(BriefSection { heading_raw: s.heading_raw, label: s.label, text: s.text, char_span: span });
        }
        (body, sections)
    } else {
        // No usable offsets: lay the sections out as a synthetic body.
        let mut body = String::new();
        let mut sections = Vec::with_capacity(rec_sections.len());
        for s in rec_sections {
            body.push_str(&s.heading_raw);
            body.push_str(":\n");
            let start = body.len();
            body.push_str(&s.text);
            sections.push(BriefSection {
                heading_raw: s.heading_raw,
                label: s.label,
                char_span: Span::new(start, body.len()),
                text: s.text,
            });
            body.push_str("\n\n");
        }
        (body, sections)
    };

    let sentences = match rec_sentences {
        None => build_sentences(&doc_id, &sections, &SentenceSplitter::default()),
        Some(list) => locate_sentences(&doc_id, &sections, list)?,
    };
    Ok(CaseBrief { doc_id, title, body, split, sections, sentences })
}

fn locate_sentences(doc_id: &str, sections: &[BriefSection], list: Vec<RecordSentence>) -> Result<Vec<Sentence>, String> {
    let mut out = Vec::with_capacity(list.len());
    let mut ids = HashSet::new();
    let (mut sec, mut cursor) = (0usize, 0usize);
    for s in list {
        if s.text.trim().is_empty() {
            return Err(format!("sentence `{}` is empty", s.sent_id));
        }
        if !ids.insert(s.sent_id.clone()) {
            return Err(format!("duplicate sentence id `{}`", s.sent_id));
        }
        let (section, span) = match (s.section, s.char_span) {
            (Some(idx), Some(span)) => {
                let text = sections.get(idx).and_then(|x| x.text.get(span.start..span.end));
                if text != Some(s.text.as_str()) {
                    return Err(format!("sentence `{}` span does not match its section", s.sent_id));
                }
                (idx, span)
            }
            _ => {
                let mut found = None;
                while sec < sections.len() {
                    if let Some(pos) = sections[sec].text.get(cursor..).and_then(|t| t.find(&s.text)) {
                        found = Some((sec, Span::new(cursor + pos, cursor + pos + s.text.len())));
                        break;
                    }
                    sec += 1;
                    cursor = 0;
                }
                found.ok_or_else(|| format!("sentence `{}` not found in section texts", s.sent_id))?
            }
        };
        sec = section;
        cursor = span.end;
        out.push(Sentence {
            sent_id: s.sent_id,
            doc_id: doc_id.to_string(),
            label: s.label,
            text: s.text,
            section,
            char_span: span,
        });
    }
    Ok(out)
}

/// Reads a line-delimited corpus file. Blank lines are skipped.
pub fn read_records(path: &Path) -> Result<Vec<CorpusRecord>, CorpusError> {
    let file = std::fs::File::open(path).map_err(|e| CorpusError::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CorpusError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(CorpusRecord::from_json(&line, i + 1)?);
    }
    Ok(out)
}

/// Writes processed briefs, one JSON object per line.
pub fn write_processed<W: Write>(mut out: W, briefs: &[CaseBrief]) -> std::io::Result<()> {
    for b in briefs {
        serde_json::to_writer(&mut out, b)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// A set of processed briefs with unique ids, in file order.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub briefs: Vec<CaseBrief>,
}

impl Corpus {
    pub fn new(briefs: Vec<CaseBrief>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for b in &briefs {
            if !seen.insert(b.doc_id.as_str()) {
                return Err(CorpusError::DuplicateDocId(b.doc_id.clone()));
            }
        }
        Ok(Self { briefs })
    }

    /// Loads a corpus file, ingesting raw records with `ingestor`. Raw
    /// records without recognizable headings are an error here; use
    /// [`ingest_all`] to skip them instead.
    pub fn load(path: &Path, ingestor: &Ingestor) -> Result<Self, CorpusError> {
        let briefs = read_records(path)?
            .into_iter()
            .map(|r| match r {
                CorpusRecord::Raw(raw) => ingestor.ingest(&raw),
                CorpusRecord::Processed(b) => Ok(b),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(briefs)
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.briefs.iter().map(|b| b.doc_id.as_str())
    }

    pub fn get(&self, doc_id: &str) -> Option<&CaseBrief> {
        self.briefs.iter().find(|b| b.doc_id == doc_id)
    }

    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.briefs.iter().flat_map(|b| b.sentences.iter())
    }

    /// Sentences of the documents in one part of `split`, in corpus order.
    pub fn sentences_in(&self, split: &DatasetSplit, part: SplitName) -> Vec<Sentence> {
        let docs = split.docs(part);
        self.briefs
            .iter()
            .filter(|b| docs.contains(&b.doc_id))
            .flat_map(|b| b.sentences.iter().cloned())
            .collect()
    }

    pub fn split(&self, seed: u64, ratios: SplitRatios) -> Result<DatasetSplit, CorpusError> {
        make_splits(self.doc_ids(), seed, ratios)
    }

    /// Hash over every sentence, in corpus order.
    pub fn fingerprint(&self) -> String {
        crate::fingerprint::sentences_fingerprint(self.sentences())
    }

    /// Records the split of every document in its `split` field.
    pub fn assign_splits(&mut self, split: &DatasetSplit) {
        for b in &mut self.briefs {
            b.split = split.split_of(&b.doc_id);
        }
    }
}

/// Outcome of a batch ingestion.
#[derive(Debug, Default)]
pub struct IngestReport {
    pub briefs: Vec<CaseBrief>,
    /// Documents rejected from the corpus, with the reason.
    pub rejected: Vec<(String, CorpusError)>,
}

/// Ingests every record; raw briefs that fail segmentation are collected in
/// `rejected` rather than aborting the batch.
pub fn ingest_all(records: Vec<CorpusRecord>, ingestor: &Ingestor) -> IngestReport {
    let mut report = IngestReport::default();
    for r in records {
        match r {
            CorpusRecord::Processed(b) => report.briefs.push(b),
            CorpusRecord::Raw(raw) => match ingestor.ingest(&raw) {
                Ok(b) => report.briefs.push(b),
                Err(e) => report.rejected.push((raw.doc_id, e)),
            },
        }
    }
    report
}
