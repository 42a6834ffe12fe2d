//! Heading detection and normalization of heading names to section labels.

use std::collections::HashMap;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{CorpusError, RawBrief, Span};
use crate::label::SectionLabel;

const DEFAULT_PATTERNS: &str = include_str!("../../data/heading_patterns.txt");
const DEFAULT_SECTION_NAMES: &str = include_str!("../../data/section_names.txt");

/// Lowercase, drop punctuation and collapse whitespace.
///
/// `"Legal Issue:"` and `"  LEGAL   issue "` both become `"legal issue"`.
pub fn normalize_heading_key(heading_raw: &str) -> String {
    let cleaned: String = heading_raw
        .chars()
        .filter(|c| !c.is_ascii_punctuation() && !matches!(c, '’' | '‘' | '“' | '”'))
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Exact-match lookup table from normalized heading names to labels.
#[derive(Debug, Clone)]
pub struct SectionNameTable {
    entries: HashMap<String, SectionLabel>,
}

impl SectionNameTable {
    /// Parses `name<TAB>Label` lines; `#` starts a comment line.
    pub fn parse(source: &str) -> Result<Self, CorpusError> {
        let mut entries = HashMap::new();
        for (lineno, line) in source.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (name, label) = line.split_once('\t').ok_or_else(|| CorpusError::InvalidTable {
                line: lineno + 1,
                reason: "expected `name<TAB>label`".into(),
            })?;
            let label: SectionLabel = label.trim().parse().map_err(|e: crate::label::UnknownLabel| {
                CorpusError::InvalidTable { line: lineno + 1, reason: e.to_string() }
            })?;
            entries.insert(normalize_heading_key(name), label);
        }
        Ok(Self { entries })
    }

    /// Returns `None` for headings without a canonical section ("Unmapped").
    pub fn lookup(&self, heading_raw: &str) -> Option<SectionLabel> {
        self.entries.get(&normalize_heading_key(heading_raw)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Default for SectionNameTable {
    fn default() -> Self {
        Self::parse(DEFAULT_SECTION_NAMES).expect("shipped section-name table parses")
    }
}

/// Maps a raw heading to its canonical label using the shipped table.
pub fn normalize_section_name(heading_raw: &str) -> Option<SectionLabel> {
    thread_local! {
        static TABLE: SectionNameTable = SectionNameTable::default();
    }
    TABLE.with(|t| t.lookup(heading_raw))
}

/// The configurable set of line-anchored heading patterns.
#[derive(Debug, Clone)]
pub struct HeadingPatterns {
    sources: Vec<String>,
    compiled: Vec<Regex>,
}

impl HeadingPatterns {
    /// One regular expression per line; blank lines and `#` comments are skipped.
    pub fn parse(source: &str) -> Result<Self, CorpusError> {
        let mut sources = Vec::new();
        let mut compiled = Vec::new();
        for (lineno, line) in source.lines().enumerate() {
            let pat = line.trim();
            if pat.is_empty() || pat.starts_with('#') {
                continue;
            }
            let wrapped = format!(
                r"(?i)^[ \t#*]*(?:(?:\d{{1,2}}|[ivxlc]{{1,5}}|[a-h])[.)][ \t]*)?(?P<heading>(?:{pat}))[ \t*]*(?P<colon>:)?[ \t*]*(?P<rest>.*)$"
            );
            let re = Regex::new(&wrapped).map_err(|e| CorpusError::InvalidPattern {
                line: lineno + 1,
                reason: e.to_string(),
            })?;
            sources.push(pat.to_string());
            compiled.push(re);
        }
        if compiled.is_empty() {
            return Err(CorpusError::InvalidPattern { line: 0, reason: "pattern file is empty".into() });
        }
        Ok(Self { sources, compiled })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, CorpusError> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| CorpusError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&source)
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    /// Matches one line (without its terminator). Returns the heading text and
    /// the byte offset within the line where section content starts.
    fn match_line<'a>(&self, line: &'a str) -> Option<(&'a str, usize)> {
        for re in &self.compiled {
            let Some(caps) = re.captures(line) else { continue };
            let heading = caps.name("heading").expect("group always present");
            let rest = caps.name("rest").expect("group always present");
            let has_colon = caps.name("colon").is_some();
            if !has_colon && !rest.as_str().trim().is_empty() {
                continue;
            }
            return Some((heading.as_str().trim(), rest.start()));
        }
        None
    }
}

impl Default for HeadingPatterns {
    fn default() -> Self {
        Self::parse(DEFAULT_PATTERNS).expect("shipped heading patterns compile")
    }
}

/// A contiguous section of a brief introduced by a heading line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BriefSection {
    pub heading_raw: String,
    /// `None` when the heading has no canonical section.
    pub label: Option<SectionLabel>,
    pub text: String,
    /// Byte offsets of `text` within the brief body.
    pub char_span: Span,
}

/// Splits a brief body into heading-delimited sections.
///
/// Text before the first heading is discarded. Section text is trimmed and
/// its span points at the trimmed text inside `raw.body`.
pub fn segment_brief(
    raw: &RawBrief,
    patterns: &HeadingPatterns,
    names: &SectionNameTable,
) -> Result<Vec<BriefSection>, CorpusError> {
    let body = raw.body.as_str();
    // (heading, content start offset, heading line start offset)
    let mut marks: Vec<(&str, usize, usize)> = Vec::new();
    let mut offset = 0;
    for line in body.split_inclusive('\n') {
        let content = line.trim_end_matches(['\n', '\r']);
        if let Some((heading, rest_at)) = patterns.match_line(content) {
            marks.push((heading, offset + rest_at, offset));
        }
        offset += line.len();
    }
    if marks.is_empty() {
        return Err(CorpusError::NoSectionsFound { doc_id: raw.doc_id.clone() });
    }

    let mut sections = Vec::with_capacity(marks.len());
    for (i, &(heading, start, _)) in marks.iter().enumerate() {
        let end = marks.get(i + 1).map_or(body.len(), |m| m.2);
        let region = &body[start..end];
        let lead = region.len() - region.trim_start().len();
        let text = region.trim();
        let span_start = if text.is_empty() { start } else { start + lead };
        sections.push(BriefSection {
            heading_raw: heading.to_string(),
            label: names.lookup(heading),
            text: text.to_string(),
            char_span: Span::new(span_start, span_start + text.len()),
        });
    }
    Ok(sections)
}
