//! Synthetic case-brief corpora with label-marked vocabulary.
//!
//! Each sentence mixes generic filler words with marker words drawn from
//! its label's vocabulary. With probability `noise` the markers come from
//! a different, uniformly chosen label instead, so the text no longer
//! identifies the gold section.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::RawBrief;
use crate::label::{SectionLabel, NUM_LABELS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub docs: usize,
    pub min_sentences: usize,
    pub max_sentences: usize,
    /// Relative label frequencies in canonical order.
    pub label_weights: [f64; NUM_LABELS],
    pub noise: f64,
    /// Chance that a brief also carries a section with no canonical label.
    pub unmapped_section_prob: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            docs: 600,
            min_sentences: 5,
            max_sentences: 12,
            label_weights: [0.40, 0.10, 0.12, 0.09, 0.22, 0.07],
            noise: 0.0,
            unmapped_section_prob: 0.2,
            seed: 7,
        }
    }
}

const FILLER: &[&str] = &[
    "the", "a", "this", "that", "which", "there", "where", "when", "after", "before", "under", "over", "with",
    "without", "from", "into", "about", "against", "between", "during", "party", "matter", "case", "time",
    "record", "question", "point", "part", "state", "person", "company", "letter", "money", "property", "year",
    "month", "many", "several", "other", "same", "each", "some", "such", "also", "then", "only", "later",
    "early", "again", "further", "fully", "clearly", "simply", "here", "whole", "first", "second",
];

fn markers(label: SectionLabel) -> &'static [&'static str] {
    match label {
        SectionLabel::Facts => &[
            "plaintiff", "purchased", "warehouse", "employed", "drove", "tenant", "landlord", "shipment", "injured",
            "delivered", "neighbor", "signed", "owned", "rented", "accident", "invoice",
        ],
        SectionLabel::Issue => &[
            "whether", "presented", "asks", "contention", "dispute", "ambiguity", "uncertain", "inquire",
            "wondering", "puzzle", "unsettled", "controversy", "asked", "pondered", "doubt", "posed",
        ],
        SectionLabel::Holding => &[
            "held", "affirmed", "reversed", "remanded", "vacated", "granted", "denied", "judgment", "concluded",
            "upheld", "overturned", "sustained", "dismissed", "ordered", "decided", "entered",
        ],
        SectionLabel::ProceduralHistory => &[
            "trial", "appealed", "appellate", "petition", "certiorari", "lower", "filed", "motion", "jury",
            "verdict", "district", "circuit", "hearing", "docketed", "intermediate", "prior",
        ],
        SectionLabel::Reasoning => &[
            "because", "reasoned", "therefore", "since", "rationale", "consequently", "policy", "analogous",
            "precedent", "persuasive", "logic", "weighs", "balancing", "explained", "interpreting", "considering",
        ],
        SectionLabel::Rule => &[
            "statute", "doctrine", "requires", "elements", "negligence", "duty", "standard", "test", "liable",
            "provision", "codified", "principle", "obligation", "prohibits", "mandates", "element",
        ],
    }
}

fn headings(label: SectionLabel) -> &'static [&'static str] {
    match label {
        SectionLabel::Facts => &["Facts", "Facts:", "Background", "Statement of Facts:", "Key Facts"],
        SectionLabel::Issue => &["Issue", "Issue:", "Legal Issue", "Question Presented:", "Issues"],
        SectionLabel::Holding => &["Holding", "Holding:", "Decision", "Ruling:"],
        SectionLabel::ProceduralHistory => &["Procedural History", "Procedural History:", "Procedural Posture", "Prior History:"],
        SectionLabel::Reasoning => &["Reasoning", "Reasoning:", "Analysis", "Rationale:", "Court's Reasoning"],
        SectionLabel::Rule => &["Rule", "Rule:", "Rule of Law", "Rules of Law:", "Legal Rule"],
    }
}

/// Section order within a generated brief.
const BRIEF_ORDER: [SectionLabel; NUM_LABELS] = [
    SectionLabel::Facts,
    SectionLabel::ProceduralHistory,
    SectionLabel::Issue,
    SectionLabel::Rule,
    SectionLabel::Holding,
    SectionLabel::Reasoning,
];

const UNMAPPED_HEADINGS: &[&str] = &["Dissent:", "Concurrence", "Notes:"];

/// A generated brief together with the sentences it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBrief {
    pub raw: RawBrief,
    /// Labeled sentences in body order, excluding unmapped sections.
    pub sentences: Vec<(SectionLabel, String)>,
}

pub struct Generator {
    config: SynthConfig,
    rng: ChaCha8Rng,
}

impl Generator {
    pub fn new(config: SynthConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self { config, rng }
    }

    fn draw_label(&mut self) -> SectionLabel {
        let total: f64 = self.config.label_weights.iter().sum();
        let mut x = self.rng.gen::<f64>() * total;
        for l in SectionLabel::ALL {
            x -= self.config.label_weights[l.index()];
            if x < 0.0 {
                return l;
            }
        }
        SectionLabel::ALL[NUM_LABELS - 1]
    }

    fn sentence(&mut self, marker_label: Option<SectionLabel>) -> String {
        let mut words: Vec<&str> = (0..self.rng.gen_range(4..=9)).map(|_| *FILLER.choose(&mut self.rng).unwrap()).collect();
        if let Some(label) = marker_label {
            for _ in 0..2 {
                words.push(markers(label).choose(&mut self.rng).unwrap());
            }
        }
        words.shuffle(&mut self.rng);
        let mut s = words.join(" ");
        s[..1].make_ascii_uppercase();
        s.push('.');
        s
    }

    fn labeled_sentence(&mut self, gold: SectionLabel) -> String {
        let marker_label = if self.rng.gen::<f64>() < self.config.noise {
            let others: Vec<SectionLabel> = SectionLabel::ALL.into_iter().filter(|l| *l != gold).collect();
            *others.choose(&mut self.rng).unwrap()
        } else {
            gold
        };
        self.sentence(Some(marker_label))
    }

    pub fn brief(&mut self, index: usize) -> SyntheticBrief {
        let n = self.rng.gen_range(self.config.min_sentences..=self.config.max_sentences.max(self.config.min_sentences));
        let mut by_label: [Vec<String>; NUM_LABELS] = Default::default();
        for _ in 0..n.max(1) {
            let gold = self.draw_label();
            let s = self.labeled_sentence(gold);
            by_label[gold.index()].push(s);
        }
        let mut body = String::new();
        let mut sentences = Vec::new();
        for label in BRIEF_ORDER {
            let list = std::mem::take(&mut by_label[label.index()]);
            if list.is_empty() {
                continue;
            }
            body.push_str(headings(label).choose(&mut self.rng).unwrap());
            body.push('\n');
            body.push_str(&list.join(" "));
            body.push_str("\n\n");
            sentences.extend(list.into_iter().map(|s| (label, s)));
        }
        if self.rng.gen::<f64>() < self.config.unmapped_section_prob {
            body.push_str(UNMAPPED_HEADINGS.choose(&mut self.rng).unwrap());
            body.push('\n');
            let extra: Vec<String> = (0..self.rng.gen_range(1..=3)).map(|_| self.sentence(None)).collect();
            body.push_str(&extra.join(" "));
            body.push('\n');
        }
        SyntheticBrief {
            raw: RawBrief { doc_id: format!("syn-{index:04}"), title: format!("Synthetic Case {index}"), body },
            sentences,
        }
    }

    pub fn generate(mut self) -> Vec<SyntheticBrief> {
        (0..self.config.docs).map(|i| self.brief(i)).collect()
    }
}

pub fn generate(config: &SynthConfig) -> Vec<SyntheticBrief> {
    Generator::new(config.clone()).generate()
}
