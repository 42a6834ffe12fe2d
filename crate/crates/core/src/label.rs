//! The closed six-value vocabulary of case-brief sections.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A case-brief section. The declaration order is the canonical order used
/// for tie-breaking, serialization of distributions and brief export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SectionLabel {
    Facts,
    Issue,
    Holding,
    ProceduralHistory,
    Reasoning,
    Rule,
}

/// Number of section labels.
pub const NUM_LABELS: usize = 6;

impl SectionLabel {
    /// All labels in canonical order.
    pub const ALL: [SectionLabel; NUM_LABELS] = [
        SectionLabel::Facts,
        SectionLabel::Issue,
        SectionLabel::Holding,
        SectionLabel::ProceduralHistory,
        SectionLabel::Reasoning,
        SectionLabel::Rule,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<SectionLabel> {
        Self::ALL.get(index).copied()
    }

    /// Identifier used on the wire and in files.
    pub fn as_str(self) -> &'static str {
        match self {
            SectionLabel::Facts => "Facts",
            SectionLabel::Issue => "Issue",
            SectionLabel::Holding => "Holding",
            SectionLabel::ProceduralHistory => "ProceduralHistory",
            SectionLabel::Reasoning => "Reasoning",
            SectionLabel::Rule => "Rule",
        }
    }

    /// Heading as it appears in an exported brief.
    pub fn heading(self) -> &'static str {
        match self {
            SectionLabel::ProceduralHistory => "Procedural History",
            other => other.as_str(),
        }
    }
}

impl fmt::Display for SectionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown section label `{0}`")]
pub struct UnknownLabel(pub String);

impl FromStr for SectionLabel {
    type Err = UnknownLabel;

    /// Accepts the wire identifier or the display heading, case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| !c.is_whitespace() && *c != '_').collect();
        SectionLabel::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(&key))
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_matches_indices() {
        for (i, l) in SectionLabel::ALL.iter().enumerate() {
            assert_eq!(l.index(), i);
            assert_eq!(SectionLabel::from_index(i), Some(*l));
        }
        assert_eq!(SectionLabel::from_index(6), None);
        assert!(SectionLabel::Facts < SectionLabel::Issue);
        assert!(SectionLabel::Reasoning < SectionLabel::Rule);
    }

    #[test]
    fn parses_wire_and_heading_forms() {
        assert_eq!("ProceduralHistory".parse(), Ok(SectionLabel::ProceduralHistory));
        assert_eq!("procedural history".parse(), Ok(SectionLabel::ProceduralHistory));
        assert_eq!("procedural_history".parse(), Ok(SectionLabel::ProceduralHistory));
        assert_eq!("RULE".parse(), Ok(SectionLabel::Rule));
        assert!("Dissent".parse::<SectionLabel>().is_err());
    }

    #[test]
    fn serde_uses_wire_names() {
        let s = serde_json::to_string(&SectionLabel::ProceduralHistory).unwrap();
        assert_eq!(s, "\"ProceduralHistory\"");
    }
}
