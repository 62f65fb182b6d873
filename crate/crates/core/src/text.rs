//! Shared text handling: NFC normalization, the tokenizer used by both the
//! augmentation filters and the metric engine, a minimal suffix stemmer and
//! the stopword list.

use std::collections::HashSet;
use std::sync::OnceLock;

use unicode_normalization::UnicodeNormalization;

/// Returns the NFC form of `text`.
pub fn nfc(text: &str) -> String {
    text.nfc().collect()
}

/// A token together with its byte span in the source string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpannedToken {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

impl SpannedToken {
    pub fn is_word(&self) -> bool {
        self.text.chars().next().is_some_and(char::is_alphanumeric)
    }
}

/// Tokenizes `text` keeping byte spans into the original string.
///
/// Runs of alphanumeric characters form word tokens; every other
/// non-whitespace character is a single punctuation token. Token text is
/// lowercased and NFC-normalized; spans refer to `text` as given.
pub fn tokenize_spans(text: &str) -> Vec<SpannedToken> {
    let mut out = Vec::new();
    let mut word_start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if word_start.is_none() {
                word_start = Some(i);
            }
            continue;
        }
        if let Some(s) = word_start.take() {
            out.push(spanned(text, s, i));
        }
        if !c.is_whitespace() {
            out.push(spanned(text, i, i + c.len_utf8()));
        }
    }
    if let Some(s) = word_start {
        out.push(spanned(text, s, text.len()));
    }
    out
}

fn spanned(text: &str, start: usize, end: usize) -> SpannedToken {
    SpannedToken {
        text: nfc(&text[start..end].to_lowercase()),
        start,
        end,
    }
}

/// Lowercase, NFC, split on whitespace and punctuation; punctuation is kept
/// as separate tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let normalized = nfc(text);
    tokenize_spans(&normalized)
        .into_iter()
        .map(|t| t.text)
        .collect()
}

/// Word tokens only (punctuation dropped).
pub fn words(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| is_word(t))
        .collect()
}

pub fn is_word(token: &str) -> bool {
    token.chars().next().is_some_and(char::is_alphanumeric)
}

/// Minimal suffix stripper used by the METEOR stem stage: removes one of
/// `-ing`, `-ed`, `-es`, `-s` (never `-ss`), keeping a stem of at least
/// three characters.
pub fn stem(token: &str) -> String {
    let chars = token.chars().count();
    for (suffix, min_len) in [("ing", 6), ("ed", 5), ("es", 5)] {
        if chars >= min_len {
            if let Some(s) = token.strip_suffix(suffix) {
                return s.to_string();
            }
        }
    }
    if chars >= 4 && token.ends_with('s') && !token.ends_with("ss") {
        return token[..token.len() - 1].to_string();
    }
    token.to_string()
}

/// Plural-to-singular for head nouns (`pillows` -> `pillow`, `boxes` -> `box`).
pub fn singularize(token: &str) -> String {
    if token.len() > 4 && token.ends_with("ies") {
        return format!("{}y", &token[..token.len() - 3]);
    }
    for suffix in ["ches", "shes", "xes", "sses"] {
        if token.len() > suffix.len() + 1 && token.ends_with(suffix) {
            return token[..token.len() - 2].to_string();
        }
    }
    if token.len() > 3 && token.ends_with('s') && !token.ends_with("ss") && !token.ends_with("us")
    {
        return token[..token.len() - 1].to_string();
    }
    token.to_string()
}

const STOPWORDS_TXT: &str = include_str!("../resources/stopwords.txt");

/// The checked-in English stopword list.
pub fn stopwords() -> &'static HashSet<String> {
    static SET: OnceLock<HashSet<String>> = OnceLock::new();
    SET.get_or_init(|| parse_word_list(STOPWORDS_TXT).into_iter().collect())
}

/// Parses a plain-text word list: one token per line, `#` comments and
/// blank lines ignored, entries lowercased.
pub fn parse_word_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| nfc(&l.to_lowercase()))
        .collect()
}

const NUMBER_WORDS: [&str; 21] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen", "twenty",
];

/// Parses a cardinal written as digits or as an English word up to twenty.
pub fn parse_cardinal(token: &str) -> Option<u32> {
    if let Ok(n) = token.parse::<u32>() {
        return Some(n);
    }
    NUMBER_WORDS
        .iter()
        .position(|w| *w == token)
        .map(|p| p as u32)
}

/// English word for `n` when `n <= 20`, digits otherwise.
pub fn cardinal_word(n: u32) -> String {
    NUMBER_WORDS
        .get(n as usize)
        .map(|w| w.to_string())
        .unwrap_or_else(|| n.to_string())
}
