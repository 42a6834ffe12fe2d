//! Rule-based sentence boundary detection tuned for legal prose.
//!
//! A boundary is placed after `.`, `?` or `!` (plus any closing quotes or
//! brackets) when the next non-space character is an uppercase letter, a
//! digit or an opening quote. Breaks are suppressed after known
//! abbreviations and inside balanced parentheses or brackets such as
//! citation parentheticals. A blank line always ends a sentence.

use std::collections::HashSet;

use super::{CorpusError, Span};

const DEFAULT_ABBREVIATIONS: &str = include_str!("../../data/abbreviations.txt");

#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: HashSet<String>,
    /// Abbreviations only when a numeral follows, as in `No. 12`.
    before_numerals: HashSet<String>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self::from_abbreviation_list(DEFAULT_ABBREVIATIONS)
    }
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | '”' | '’' | ')' | ']')
}

fn opens_sentence(c: char) -> bool {
    c.is_uppercase() || c.is_ascii_digit() || matches!(c, '"' | '\'' | '“' | '‘')
}

impl SentenceSplitter {
    /// One abbreviation per line, without the trailing period. A trailing
    /// ` #` restricts an entry to tokens followed by a numeral.
    pub fn from_abbreviation_list(source: &str) -> Self {
        let mut abbreviations = HashSet::new();
        let mut before_numerals = HashSet::new();
        for line in source.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            match line.strip_suffix('#') {
                Some(token) => before_numerals.insert(token.trim_end().trim_end_matches('.').to_string()),
                None => abbreviations.insert(line.trim_end_matches('.').to_string()),
            };
        }
        Self { abbreviations, before_numerals }
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, CorpusError> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| CorpusError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self::from_abbreviation_list(&source))
    }

    /// Whether `token` (without its period) is an abbreviation when
    /// followed by `next`.
    pub fn is_abbreviation(&self, token: &str, next: Option<char>) -> bool {
        let token = token.trim_start_matches(['(', '[', '"', '\'', '“', '‘']);
        self.abbreviations.contains(token)
            || (next.is_some_and(|c| c.is_ascii_digit()) && self.before_numerals.contains(token))
    }

    /// Byte spans of the sentences in `text`, in order. Spans are trimmed,
    /// non-overlapping and together cover every non-whitespace character.
    pub fn split(&self, text: &str) -> Vec<Span> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let guards = balanced_brackets(&chars);
        let byte_end = |i: usize| chars.get(i).map_or(text.len(), |&(b, _)| b);

        let mut spans = Vec::new();
        let mut start: Option<usize> = None;
        let mut last_non_ws_end = 0;
        let mut depth = 0i32;
        let mut i = 0;
        while i < chars.len() {
            let (b, c) = chars[i];
            if c.is_whitespace() {
                if c == '\n' && start.is_some() && blank_line_follows(&chars, i) {
                    spans.push(Span::new(start.take().unwrap(), last_non_ws_end));
                }
                i += 1;
                continue;
            }
            if start.is_none() {
                start = Some(b);
            }
            last_non_ws_end = b + c.len_utf8();
            match guards[i] {
                Guard::Open => depth += 1,
                Guard::Close => depth -= 1,
                Guard::None => {}
            }

            if depth == 0 && matches!(c, '.' | '?' | '!') {
                let mut j = i + 1;
                while j < chars.len() && (matches!(chars[j].1, '.' | '?' | '!') || (is_closer(chars[j].1) && guards[j] == Guard::None)) {
                    j += 1;
                }
                let end = byte_end(j);
                let mut k = j;
                while k < chars.len() && chars[k].1.is_whitespace() {
                    k += 1;
                }
                let followed_by_space = k > j;
                let next_opens = k < chars.len() && opens_sentence(chars[k].1);
                if followed_by_space && next_opens && !(c == '.' && self.token_is_abbreviation(text, &chars, i, chars.get(k).map(|p| p.1))) {
                    spans.push(Span::new(start.take().unwrap(), end));
                    last_non_ws_end = end;
                    i = k;
                    continue;
                }
                // Consume the extension so closers are not re-examined.
                last_non_ws_end = end;
                i = j;
                continue;
            }
            i += 1;
        }
        if let Some(s) = start {
            spans.push(Span::new(s, last_non_ws_end));
        }
        spans
    }

    fn token_is_abbreviation(&self, text: &str, chars: &[(usize, char)], dot: usize, next: Option<char>) -> bool {
        let dot_byte = chars[dot].0;
        let token_start = chars[..dot]
            .iter()
            .rev()
            .find(|(_, c)| c.is_whitespace())
            .map_or(0, |&(b, c)| b + c.len_utf8());
        let token = &text[token_start..dot_byte];
        !token.is_empty() && self.is_abbreviation(token, next)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Guard {
    None,
    Open,
    Close,
}

/// Marks brackets that have a matching partner; unmatched ones are ignored
/// so a stray `(` cannot swallow the rest of the text.
fn balanced_brackets(chars: &[(usize, char)]) -> Vec<Guard> {
    let mut guards = vec![Guard::None; chars.len()];
    let mut stack: Vec<(usize, char)> = Vec::new();
    for (i, &(_, c)) in chars.iter().enumerate() {
        match c {
            '(' | '[' => stack.push((i, c)),
            ')' | ']' => {
                let want = if c == ')' { '(' } else { '[' };
                if let Some(pos) = stack.iter().rposition(|&(_, o)| o == want) {
                    let (open, _) = stack[pos];
                    stack.truncate(pos);
                    guards[open] = Guard::Open;
                    guards[i] = Guard::Close;
                }
            }
            '\n' if blank_line_follows(chars, i) => stack.clear(),
            _ => {}
        }
    }
    guards
}

fn blank_line_follows(chars: &[(usize, char)], newline: usize) -> bool {
    chars[newline + 1..]
        .iter()
        .take_while(|(_, c)| c.is_whitespace())
        .any(|(_, c)| *c == '\n')
}

/// Splits with the shipped abbreviation list.
pub fn split_sentences(text: &str) -> Vec<Span> {
    thread_local! {
        static SPLITTER: SentenceSplitter = SentenceSplitter::default();
    }
    SPLITTER.with(|s| s.split(text))
}
