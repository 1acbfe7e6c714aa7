//! Tokenization shared by corpus analytics, metrics and parsing.
//!
//! Lowercase, split on whitespace, strip leading and trailing punctuation,
//! drop tokens that end up empty.

use std::collections::HashSet;
use std::sync::OnceLock;

const STOPWORDS_V1: &str = include_str!("../data/stopwords_en_v1.txt");

pub const STOPWORDS_VERSION: &str = "stopwords-en v1";

fn is_edge_punct(c: char) -> bool {
    c.is_ascii_punctuation() || matches!(c, '“' | '”' | '‘' | '’' | '«' | '»' | '…' | '–' | '—' | '¿' | '¡')
}

/// Normalizes one whitespace-delimited word; `None` if nothing is left.
pub fn normalize_token(word: &str) -> Option<String> {
    let trimmed = word.trim_matches(is_edge_punct);
    if trimmed.is_empty() {
        None
    } else {
        Some(trimmed.to_lowercase())
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().filter_map(normalize_token).collect()
}

pub fn token_count(text: &str) -> usize {
    text.split_whitespace()
        .filter(|w| !w.trim_matches(is_edge_punct).is_empty())
        .count()
}

pub fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_V1
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

pub fn is_stopword(token: &str) -> bool {
    stopwords().contains(token)
}
