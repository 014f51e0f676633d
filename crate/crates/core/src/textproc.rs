//! Sentence splitting, tokenization and n-gram extraction.
//!
//! Everything downstream (TF-IDF, ROUGE, sentence mapping) goes through the
//! same tokenizer so that similarity scores only differ by weighting.
//!
//! The splitter is rule-based: a sentence ends at `.`, `!` or `?` (plus any
//! trailing closing quotes or brackets) when it is followed by whitespace and
//! the next word starts with an uppercase letter, a digit, or an opening
//! quote. A `.` directly after a known abbreviation never ends a sentence.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io;
use std::path::Path;
use std::sync::LazyLock;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("n-gram order must be at least 1")]
    InvalidOrder,
    #[error("failed to read abbreviation file {path}: {source}")]
    AbbrevFile {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// Abbreviations (lowercase, without the final period) that never end a sentence.
pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "gen", "gov", "sen", "rep", "lt",
    "col", "capt", "sgt", "rev", "hon", "pres", "supt", "vs", "etc", "inc", "ltd", "co", "corp",
    "no", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec",
    "u.s", "u.k", "u.n", "e.g", "i.e", "a.m", "p.m", "ph.d", "approx", "dept", "est", "fig",
    "vol", "cf", "al",
];

static DEFAULT_SPLITTER: LazyLock<SentenceSplitter> = LazyLock::new(SentenceSplitter::default);

/// An ordered list of non-empty, trimmed sentences.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SentenceList {
    sentences: Vec<String>,
}

impl SentenceList {
    /// Builds a list from raw strings, trimming each and dropping blanks.
    pub fn new<I, S>(sentences: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let sentences = sentences
            .into_iter()
            .map(|s| s.as_ref().trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        Self { sentences }
    }

    /// Number of sentences (N_x for an article, N_s for a summary).
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn as_slice(&self) -> &[String] {
        &self.sentences
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.sentences.iter()
    }

    pub fn into_vec(self) -> Vec<String> {
        self.sentences
    }
}

impl<'a> IntoIterator for &'a SentenceList {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.sentences.iter()
    }
}

/// Lowercase `[a-z0-9]+` tokens of one piece of text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TokenList(Vec<String>);

impl TokenList {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }

    /// Concatenates several token lists (used for whole-summary ROUGE).
    pub fn concat<'a, I: IntoIterator<Item = &'a TokenList>>(lists: I) -> Self {
        Self(lists.into_iter().flat_map(|l| l.0.iter().cloned()).collect())
    }
}

impl<S: Into<String>> FromIterator<S> for TokenList {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(Into::into).collect())
    }
}

/// Rule-based sentence splitter with an abbreviation guard list.
#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: HashSet<String>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self {
            abbreviations: DEFAULT_ABBREVIATIONS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl SentenceSplitter {
    /// Adds abbreviations to the guard list. Entries are case-insensitive and
    /// may be given with or without the trailing period.
    pub fn with_abbreviations<I, S>(mut self, extra: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        for abbrev in extra {
            let norm = normalize_abbrev(abbrev.as_ref());
            if !norm.is_empty() {
                self.abbreviations.insert(norm);
            }
        }
        self
    }

    /// Default guard list extended with a newline-delimited file. Blank lines
    /// and lines starting with `#` are ignored.
    pub fn with_abbrev_file(self, path: &Path) -> Result<Self, TextError> {
        let text = fs::read_to_string(path).map_err(|source| TextError::AbbrevFile {
            path: path.display().to_string(),
            source,
        })?;
        let extra = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        Ok(self.with_abbreviations(extra))
    }

    pub fn is_abbreviation(&self, word: &str) -> bool {
        self.abbreviations.contains(&normalize_abbrev(word))
    }

    pub fn split(&self, text: &str) -> SentenceList {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut sentences = Vec::new();
        let mut start = 0usize;
        let mut i = 0usize;

        while i < chars.len() {
            let (_, c) = chars[i];
            if !is_terminal(c) {
                i += 1;
                continue;
            }
            let terminal_pos = i;
            // Swallow runs like `?!`, `..."` or `.)`.
            let mut j = i + 1;
            while j < chars.len() && (is_terminal(chars[j].1) || is_closing(chars[j].1)) {
                j += 1;
            }
            let end_byte = chars.get(j).map_or(text.len(), |&(b, _)| b);

            let mut k = j;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            let has_space = k > j;
            let next_ok = chars.get(k).is_some_and(|&(_, n)| starts_sentence(n));

            if has_space && next_ok && !self.guarded(text, &chars, start, terminal_pos) {
                let sentence = text[start..end_byte].trim();
                if !sentence.is_empty() {
                    sentences.push(sentence.to_string());
                }
                start = chars[k].0;
                i = k;
            } else {
                i = j;
            }
        }

        let tail = text[start..].trim();
        if !tail.is_empty() {
            sentences.push(tail.to_string());
        }
        SentenceList { sentences }
    }

    /// True when the terminal at `pos` is a period closing a guarded abbreviation.
    fn guarded(&self, text: &str, chars: &[(usize, char)], start: usize, pos: usize) -> bool {
        if chars[pos].1 != '.' {
            return false;
        }
        let end = chars[pos].0;
        let word_start = text[start..end]
            .rfind(char::is_whitespace)
            .map_or(start, |p| {
                let ws = text[start + p..].chars().next().map_or(1, char::len_utf8);
                start + p + ws
            });
        let word = text[word_start..end].trim_start_matches(is_opening);
        !word.is_empty() && self.is_abbreviation(word)
    }
}

fn normalize_abbrev(word: &str) -> String {
    word.trim().trim_end_matches('.').to_lowercase()
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closing(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201D}' | '\u{2019}')
}

fn is_opening(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '\u{201C}' | '\u{2018}')
}

fn starts_sentence(c: char) -> bool {
    c.is_uppercase() || c.is_ascii_digit() || is_opening(c)
}

/// Splits text with the default abbreviation list.
pub fn split_sentences(text: &str) -> SentenceList {
    DEFAULT_SPLITTER.split(text)
}

/// Lowercases and splits on every run of characters outside `[A-Za-z0-9]`.
pub fn tokenize(sentence: &str) -> TokenList {
    TokenList(
        sentence
            .split(|c: char| !c.is_ascii_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| t.to_ascii_lowercase())
            .collect(),
    )
}

/// Contiguous n-token windows with multiplicity.
pub fn ngrams(tokens: &TokenList, n: usize) -> Result<HashMap<&[String], usize>, TextError> {
    if n == 0 {
        return Err(TextError::InvalidOrder);
    }
    let mut counts = HashMap::new();
    for window in tokens.0.windows(n) {
        *counts.entry(window).or_insert(0) += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(words: &[&str]) -> TokenList {
        words.iter().copied().collect()
    }

    #[test]
    fn splits_simple_sentences() {
        let s = split_sentences("The cat sat. The dog ran.");
        assert_eq!(s.as_slice(), ["The cat sat.", "The dog ran."]);
    }

    #[test]
    fn abbreviation_guard_blocks_split() {
        let s = split_sentences("Dr. Smith left. He returned.");
        assert_eq!(s.as_slice(), ["Dr. Smith left.", "He returned."]);
        let s = split_sentences("He moved to the U.S. Then he left.");
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn empty_and_blank_input() {
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("   \n\t ").is_empty());
    }

    #[test]
    fn trailing_fragment_kept() {
        let s = split_sentences("First one. and then a fragment");
        assert_eq!(s.as_slice(), ["First one. and then a fragment"]);
        let s = split_sentences("First one! Second without end");
        assert_eq!(s.as_slice(), ["First one!", "Second without end"]);
    }

    #[test]
    fn quotes_and_digits_start_sentences() {
        let s = split_sentences("He said \"stop.\" \"Why?\" she asked. 3 men left.");
        assert_eq!(s.as_slice(), ["He said \"stop.\"", "\"Why?\" she asked.", "3 men left."]);
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        let s = split_sentences("Values like 3.5 are fine. ok then");
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn extra_abbreviations() {
        let splitter = SentenceSplitter::default().with_abbreviations(["Approx.", "Blvd"]);
        let s = splitter.split("Go down Sunset Blvd. Turn left.");
        assert_eq!(s.len(), 1);
        assert!(splitter.is_abbreviation("blvd."));
    }

    #[test]
    fn abbrev_file_is_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("abbrev.txt");
        fs::write(&path, "# comment\nBlvd.\n\nAve\n").unwrap();
        let splitter = SentenceSplitter::default().with_abbrev_file(&path).unwrap();
        assert!(splitter.is_abbreviation("Ave"));
        assert!(splitter.is_abbreviation("blvd"));
        assert!(SentenceSplitter::default()
            .with_abbrev_file(&dir.path().join("missing"))
            .is_err());
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("The cat sat."), toks(&["the", "cat", "sat"]));
        assert_eq!(tokenize("U.S.-based co-op"), toks(&["u", "s", "based", "co", "op"]));
        assert!(tokenize("!!!").is_empty());
        assert_eq!(tokenize("Café über 42"), toks(&["caf", "ber", "42"]));
    }

    #[test]
    fn ngram_examples() {
        let t = toks(&["a", "b", "c"]);
        let bi = ngrams(&t, 2).unwrap();
        assert_eq!(bi.len(), 2);
        assert_eq!(bi[&t.as_slice()[0..2]], 1);
        assert_eq!(bi[&t.as_slice()[1..3]], 1);

        let t = toks(&["a", "a", "a"]);
        let uni = ngrams(&t, 1).unwrap();
        assert_eq!(uni.len(), 1);
        assert_eq!(uni.values().sum::<usize>(), 3);

        assert!(ngrams(&toks(&["a", "b"]), 3).unwrap().is_empty());
        assert!(matches!(ngrams(&t, 0), Err(TextError::InvalidOrder)));
    }

    proptest! {
        #[test]
        fn tokens_are_lowercase_alnum(s in "\\PC{0,80}") {
            let t = tokenize(&s);
            prop_assert!(t.len() <= s.chars().count());
            for tok in t.iter() {
                prop_assert!(!tok.is_empty());
                prop_assert!(tok.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit()));
            }
        }

        #[test]
        fn ngram_multiplicity(words in proptest::collection::vec("[a-c]{1,2}", 0..20), n in 1usize..5) {
            let t: TokenList = words.iter().map(String::as_str).collect();
            let total: usize = ngrams(&t, n).unwrap().values().sum();
            prop_assert_eq!(total, t.len().saturating_sub(n - 1));
        }

        #[test]
        fn split_join_split_is_stable(s in "([A-Za-z]{1,6}[ .!?]{1,2}){0,12}") {
            let first = split_sentences(&s);
            let joined = first.as_slice().join(" ");
            let second = split_sentences(&joined);
            prop_assert_eq!(first.len(), second.len());
            for sentence in first.iter() {
                prop_assert!(!sentence.trim().is_empty());
            }
        }
    }
}
